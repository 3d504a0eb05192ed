//! Command-line front end: cluster graphs, generate benchmarks, evaluate
//! trees and run the exhaustive search on tiny graphs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hcse::algo::{self, CutConvention, HcseOptions, HeightChoice, LevelObjective};
use hcse::costs::{self, CostReport};
use hcse::hsbm::{self, HsbmSpec};
use hcse::metrics::{self, NmiNormalization};
use hcse::oracle::{self, EnumerationMode};
use hcse::{ClusterTree, Graph, TreeDoc};

#[derive(Parser)]
#[command(
    name = "hcse",
    about = "Hierarchical graph clustering by structural entropy",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster an edge list into a hierarchical tree.
    Cluster(ClusterArgs),
    /// Generate a hierarchical stochastic block model benchmark.
    GenHsbm(GenArgs),
    /// Evaluate a tree against a graph and optional ground truth.
    Eval(EvalArgs),
    /// Exhaustively minimize a cost over all trees of a tiny graph.
    BruteMin(BruteArgs),
}

#[derive(Args)]
struct ClusterArgs {
    /// Edge-list file: `u v [w]` per line, `#` comments.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for tree.json, costs.txt, trace.csv, sparsity.csv
    /// and run.txt.
    #[arg(long)]
    out_dir: PathBuf,
    /// Fixed tree height; omit to select the height automatically.
    #[arg(long)]
    k: Option<usize>,
    /// Round budget for automatic height selection.
    #[arg(long, default_value_t = 12)]
    max_rounds: usize,
    /// Weight local entropies by the apex's cut instead of each child's.
    #[arg(long)]
    apex_cut: bool,
    /// Allow the automatic rule to settle on a two-level tree.
    #[arg(long)]
    allow_height_two: bool,
    /// Level-selection objective.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::ScaledReduction)]
    objective: ObjectiveArg,
    /// Cross-check every closed-form entropy delta against recomputation.
    #[arg(long)]
    validate: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    ScaledReduction,
    MeanSparsity,
}

#[derive(Args)]
struct GenArgs {
    /// TOML spec: n, level_cluster_counts, p, seed, min_cluster_size.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for graph.edges, truth.json and spec.txt.
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Edge-list file the tree refers to.
    #[arg(long)]
    graph: PathBuf,
    /// Tree document to evaluate.
    #[arg(long)]
    tree: PathBuf,
    /// Ground-truth tree document; enables per-level NMI and the average
    /// Jaccard index.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// NMI normalization.
    #[arg(long, value_enum, default_value_t = NmiArg::Arithmetic)]
    nmi_norm: NmiArg,
    /// Also write the report as `metric,value` CSV rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NmiArg {
    Arithmetic,
    Geometric,
}

#[derive(Args)]
struct BruteArgs {
    /// Edge-list file (tiny graphs only).
    #[arg(long)]
    input: PathBuf,
    /// Tree family to enumerate.
    #[arg(long, value_enum, default_value_t = ModeArg::Binary)]
    mode: ModeArg,
    /// Cost to minimize.
    #[arg(long, value_enum, default_value_t = CostArg::Se)]
    cost: CostArg,
    /// Write every minimizer as a JSON array of tree documents.
    #[arg(long)]
    trees: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Binary,
    Multi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostArg {
    Se,
    Dasgupta,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::GenHsbm(args) => cmd_gen_hsbm(args),
        Command::Eval(args) => cmd_eval(args),
        Command::BruteMin(args) => cmd_brute_min(args),
    }
}

fn load_graph(path: &Path) -> Result<(Graph, Vec<String>)> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (graph, labels) =
        Graph::from_edge_list(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    Ok((graph, labels))
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let (graph, labels) = load_graph(&args.input)?;
    if graph.vertex_count() == 0 || graph.edges().is_empty() {
        bail!("input graph is empty");
    }
    let opts = HcseOptions {
        max_rounds: args.max_rounds,
        cut_convention: if args.apex_cut {
            CutConvention::ApexCut
        } else {
            CutConvention::ChildCut
        },
        level_objective: match args.objective {
            ObjectiveArg::ScaledReduction => LevelObjective::ScaledReduction,
            ObjectiveArg::MeanSparsity => LevelObjective::MeanSparsity,
        },
        allow_height_two: args.allow_height_two,
        validate: args.validate,
    };
    let outcome = match args.k {
        Some(k) => algo::cluster_to_height(&graph, k, &opts)?,
        None => algo::cluster_auto(&graph, &opts)?,
    };
    if outcome.height_clamped {
        eprintln!(
            "warning: requested height exceeds n - 1, clamped to {}",
            outcome.height
        );
    }

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("tree.json"), outcome.tree.to_json(&labels)?)?;
    let report = CostReport::compute(&graph, &outcome.tree)?;
    fs::write(args.out_dir.join("costs.txt"), report.to_kv())?;
    fs::write(args.out_dir.join("trace.csv"), outcome.trace.to_csv())?;
    fs::write(args.out_dir.join("sparsity.csv"), outcome.trace.sparsity_csv())?;

    let mut echo = String::new();
    echo.push_str("command cluster\n");
    echo.push_str(&format!("input {}\n", args.input.display()));
    echo.push_str(&format!("out_dir {}\n", args.out_dir.display()));
    echo.push_str(&format!(
        "k {}\n",
        args.k.map_or_else(|| "auto".to_string(), |k| k.to_string())
    ));
    echo.push_str(&format!("max_rounds {}\n", args.max_rounds));
    echo.push_str(&format!(
        "cut_convention {}\n",
        if args.apex_cut { "apex" } else { "child" }
    ));
    echo.push_str(&format!(
        "objective {}\n",
        match args.objective {
            ObjectiveArg::ScaledReduction => "scaled-reduction",
            ObjectiveArg::MeanSparsity => "mean-sparsity",
        }
    ));
    echo.push_str(&format!("allow_height_two {}\n", args.allow_height_two));
    echo.push_str(&format!("validate {}\n", args.validate));
    echo.push_str(&format!("height {}\n", outcome.height));
    echo.push_str(&format!(
        "height_choice {}\n",
        match outcome.choice {
            HeightChoice::Requested => "requested".to_string(),
            HeightChoice::Inflection(t) => format!("inflection at round {t}"),
            HeightChoice::SparsityExhausted(t) => format!("sparsity exhausted at height {t}"),
            HeightChoice::MaxSecondDifference(t) =>
                format!("no inflection within budget; max second difference at round {t}"),
        }
    ));
    fs::write(args.out_dir.join("run.txt"), echo)?;

    println!("height {}", outcome.height);
    print!("{}", report.to_kv());
    Ok(())
}

fn cmd_gen_hsbm(args: GenArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec: HsbmSpec =
        toml::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (graph, truth) = hsbm::generate(&spec)?;
    let labels: Vec<String> = (0..spec.n).map(|v| v.to_string()).collect();

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(
        args.out_dir.join("graph.edges"),
        graph.to_edge_list_string(&labels),
    )?;
    fs::write(args.out_dir.join("truth.json"), truth.tree.to_json(&labels)?)?;
    let echo = toml::to_string(&spec).context("serializing the materialized spec")?;
    fs::write(args.out_dir.join("spec.txt"), echo)?;

    println!(
        "n {}\nedges {}\nlevels {}",
        spec.n,
        graph.edges().len(),
        truth.level_count()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (graph, labels) = load_graph(&args.graph)?;
    let tree_json = fs::read_to_string(&args.tree)
        .with_context(|| format!("reading {}", args.tree.display()))?;
    let tree = ClusterTree::from_json(&tree_json, &graph, &labels)
        .with_context(|| format!("binding {} to the graph", args.tree.display()))?;

    let report = CostReport::compute(&graph, &tree)?;
    let mut rows: Vec<(String, String)> = vec![
        ("one_level_entropy".into(), report.one_level_entropy.to_string()),
        ("structural_entropy".into(), report.structural_entropy.to_string()),
        ("cost_se".into(), report.cost_se.to_string()),
        ("cost_dasgupta".into(), report.cost_dasgupta.to_string()),
        ("height".into(), tree.height().to_string()),
    ];

    if let Some(truth_path) = &args.truth {
        let truth_json = fs::read_to_string(truth_path)
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let truth_tree = ClusterTree::from_json(&truth_json, &graph, &labels)
            .with_context(|| format!("binding {} to the graph", truth_path.display()))?;
        let norm = match args.nmi_norm {
            NmiArg::Arithmetic => NmiNormalization::Arithmetic,
            NmiArg::Geometric => NmiNormalization::Geometric,
        };

        // compare the flat clusterings level by level as far as both trees go
        let shared = tree.height().min(truth_tree.height()).saturating_sub(1);
        for level in 0..shared {
            let mine = metrics::partition_at_level(&tree, level)?;
            let planted = metrics::partition_at_level(&truth_tree, level)?;
            let score = metrics::nmi_with(&mine, &planted, norm)?;
            rows.push((format!("nmi_level_{level}"), score.to_string()));
        }

        // ground-truth clusters: every non-root internal node of the truth tree
        let clusters: Vec<Vec<usize>> = truth_tree
            .internal_nodes()
            .filter(|&id| id != truth_tree.root())
            .map(|id| truth_tree.leaves_under(id))
            .collect();
        if clusters.is_empty() {
            bail!("the truth tree has no non-root clusters to match");
        }
        let jaccard = metrics::avg_jaccard(&tree, &clusters)?;
        rows.push(("avg_jaccard".into(), jaccard.to_string()));
    }

    for (key, value) in &rows {
        println!("{key} {value}");
    }
    if let Some(csv) = &args.csv {
        let mut out = String::from("metric,value\n");
        for (key, value) in &rows {
            out.push_str(&format!("{key},{value}\n"));
        }
        fs::write(csv, out)?;
    }
    Ok(())
}

fn cmd_brute_min(args: BruteArgs) -> Result<()> {
    let (graph, labels) = load_graph(&args.input)?;
    let mode = match args.mode {
        ModeArg::Binary => EnumerationMode::Binary,
        ModeArg::Multi => EnumerationMode::Multifurcating,
    };
    let result = match args.cost {
        CostArg::Se => oracle::brute_min(&graph, mode, |g, t| {
            costs::cost_se(g, t).expect("valid enumerated tree")
        })?,
        CostArg::Dasgupta => oracle::brute_min(&graph, mode, |g, t| {
            costs::cost_dasgupta(g, t).expect("valid enumerated tree")
        })?,
    };
    println!("trees {}", result.tree_count);
    println!("minimum {}", result.minimum);
    println!("argmin_count {}", result.argmin.len());

    if let Some(path) = &args.trees {
        let docs: Vec<TreeDoc> = result
            .argmin
            .iter()
            .map(|shape| {
                ClusterTree::from_shape(&graph, shape)
                    .expect("argmin shape is valid")
                    .to_doc(&labels)
            })
            .collect();
        let mut json = serde_json::to_string_pretty(&docs)?;
        json.push('\n');
        fs::write(path, json)?;
    }
    Ok(())
}
