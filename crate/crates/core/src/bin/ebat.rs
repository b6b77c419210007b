//! Command-line front end: run strategy comparisons across K values and
//! seeds, compare strategies with Wilcoxon signed-rank tests, and dump the
//! fold-level adjustment trees.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ebat::adaptation::{build_difference_table, Strategy};
use ebat::dataset::{apply_normalizer, fit_normalizer, load_dataset, remove_missing, Dataset, Schema};
use ebat::evaluation::{
    boxplot_stats, make_folds, run_experiment, wilcoxon_signed_rank, ExperimentOutcome,
};
use ebat::modeltree::{ModelTree, TreeParams};
use ebat::Result;

#[derive(Parser)]
#[command(name = "ebat", version, about = "Analogy-based effort estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-validation protocol for every (strategy, K, seed)
    /// combination and write report, residual, and boxplot files.
    Run(RunArgs),
    /// Wilcoxon signed-rank comparison of a baseline strategy against the
    /// other requested strategies (best K per strategy, paired residuals).
    Compare(CompareArgs),
    /// Rebuild the adjustment tree for one training fold and dump it.
    InspectTree(InspectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset file (delimited text with a header row)
    #[arg(long)]
    dataset: PathBuf,
    /// Schema file (one `name:kind` line per column)
    #[arg(long)]
    schema: PathBuf,
    /// Output directory (created if absent)
    #[arg(long, default_value = "ebat-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Strategy token (repeatable): eba, wmean, l-eba, mendes, s-eba, r-eba, mt-eba
    #[arg(long = "strategy", required = true)]
    strategies: Vec<String>,
    /// Comma-separated K values, e.g. 1,2,3
    #[arg(long, default_value = "1,2,3")]
    k: String,
    /// Number of cross-validation folds
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// Comma-separated seeds for the fold shuffle
    #[arg(long, default_value = "1")]
    seed: String,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "strategy", required = true)]
    strategies: Vec<String>,
    /// Baseline strategy token the others are tested against
    #[arg(long)]
    baseline: String,
    #[arg(long, default_value = "1,2,3")]
    k: String,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// Seed shared by all strategies so residuals pair per project
    #[arg(long, default_value = "1")]
    seed: String,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which fold's training side to rebuild the tree from
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value = "1")]
    seed: String,
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| ebat::Error::InvalidArgument(format!("bad {what} value `{t}`")))
        })
        .collect()
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| ebat::Error::InvalidArgument(format!("bad seed value `{t}`")))
        })
        .collect()
}

fn parse_strategies(tokens: &[String]) -> Result<Vec<Strategy>> {
    let mut out = Vec::new();
    for t in tokens {
        let s = Strategy::parse(t)?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

fn load_clean(common: &CommonArgs) -> Result<Dataset> {
    let schema = Schema::from_file(&common.schema)?;
    let d = load_dataset(&common.dataset, &schema)?;
    Ok(remove_missing(&d))
}

/// (strategy, K) pairs actually run; r-eba collapses to K = 1.
fn expand_variants(strategies: &[Strategy], ks: &[usize]) -> Vec<(Strategy, usize)> {
    let mut variants = Vec::new();
    for &s in strategies {
        match s.forced_k() {
            Some(k) => variants.push((s, k)),
            None => {
                for &k in ks {
                    variants.push((s, k));
                }
            }
        }
    }
    variants
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let d = load_clean(&args.common)?;
    let strategies = parse_strategies(&args.strategies)?;
    let ks = parse_usize_list(&args.k, "K")?;
    let seeds = parse_seed_list(&args.seed)?;
    if ks.is_empty() || strategies.is_empty() || seeds.is_empty() {
        return Err(ebat::Error::InvalidArgument(
            "need at least one strategy, K value, and seed".into(),
        ));
    }
    fs::create_dir_all(&args.common.out).map_err(|source| ebat::Error::Io {
        path: args.common.out.display().to_string(),
        source,
    })?;

    let variants = expand_variants(&strategies, &ks);
    let mut report_lines = vec!["strategy,k,seed,mmre,mdmre,pred25,n".to_string()];
    let mut boxplot_lines = vec!["strategy,k,seed,min,q1,median,q3,max_whisker,outliers".to_string()];
    // (strategy, k) -> per-seed metric triples, for the stdout grid
    let mut grid: BTreeMap<(String, usize), Vec<(f64, f64, f64)>> = BTreeMap::new();
    let mut total_floored = 0usize;

    for &(strategy, k) in &variants {
        for &seed in &seeds {
            let out = run_experiment(&d, strategy, k, args.folds, seed)?;
            total_floored += out.floored;
            let r = &out.report;
            report_lines.push(format!(
                "{},{},{},{},{},{},{}",
                strategy, k, seed, r.mmre, r.mdmre, r.pred25, r.n
            ));
            let bp = boxplot_stats(&r.residuals)?;
            let outliers = bp
                .outliers
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
            boxplot_lines.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                strategy, k, seed, bp.min, bp.q1, bp.median, bp.q3, bp.upper_whisker, outliers
            ));
            let residuals: String = r
                .residuals
                .iter()
                .map(|v| format!("{v}\n"))
                .collect();
            write_file(
                &args.common.out.join(format!("residuals-{strategy}-k{k}-seed{seed}.txt")),
                &residuals,
            )?;
            grid.entry((strategy.token().to_string(), k))
                .or_default()
                .push((r.mmre, r.mdmre, r.pred25));
        }
    }

    write_file(&args.common.out.join("report.csv"), &(report_lines.join("\n") + "\n"))?;
    write_file(&args.common.out.join("boxplot.csv"), &(boxplot_lines.join("\n") + "\n"))?;

    // Table-style grid; medians across seeds, percentages to one decimal.
    println!("{:<10} {:>3} {:>8} {:>8} {:>8}", "strategy", "K", "MMRE%", "MdMRE%", "PRED%");
    for ((strategy, k), triples) in &grid {
        let mmre = median_of(triples.iter().map(|t| t.0).collect());
        let mdmre = median_of(triples.iter().map(|t| t.1).collect());
        let pred = median_of(triples.iter().map(|t| t.2).collect());
        println!(
            "{:<10} {:>3} {:>8.1} {:>8.1} {:>8.1}",
            strategy,
            k,
            mmre * 100.0,
            mdmre * 100.0,
            pred
        );
    }
    if total_floored > 0 {
        println!("note: {total_floored} adapted efforts floored to stay positive");
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let d = load_clean(&args.common)?;
    let strategies = parse_strategies(&args.strategies)?;
    let baseline = Strategy::parse(&args.baseline)?;
    if strategies.len() < 2 || !strategies.contains(&baseline) {
        return Err(ebat::Error::InvalidArgument(
            "compare needs the baseline plus at least one other strategy".into(),
        ));
    }
    let ks = parse_usize_list(&args.k, "K")?;
    let seeds = parse_seed_list(&args.seed)?;
    let seed = *seeds.first().ok_or_else(|| {
        ebat::Error::InvalidArgument("need at least one seed".into())
    })?;
    fs::create_dir_all(&args.common.out).map_err(|source| ebat::Error::Io {
        path: args.common.out.display().to_string(),
        source,
    })?;

    // Best K (lowest pooled MMRE) per strategy; one shared seed keeps the
    // fold plan, and hence the residual pairing, identical everywhere.
    let best: BTreeMap<&'static str, (usize, ExperimentOutcome)> = strategies
        .iter()
        .map(|&s| {
            let mut chosen: Option<(usize, ExperimentOutcome)> = None;
            for &(strategy, k) in &expand_variants(&[s], &ks) {
                let out = run_experiment(&d, strategy, k, args.folds, seed)?;
                if chosen
                    .as_ref()
                    .map_or(true, |(_, prev)| out.report.mmre < prev.report.mmre)
                {
                    chosen = Some((k, out));
                }
            }
            Ok((s.token(), chosen.unwrap()))
        })
        .collect::<Result<_>>()?;

    let (base_k, base_out) = &best[baseline.token()];
    let base_by_id: BTreeMap<&str, f64> = base_out
        .pairs
        .iter()
        .zip(&base_out.report.residuals)
        .map(|(p, &r)| (p.id.as_str(), r))
        .collect();

    let mut lines = vec!["strategy,k,z,p,significance".to_string()];
    println!("baseline {} (K={base_k})", baseline.token());
    println!("{:<10} {:>3} {:>8} {:>10} {:>4}", "strategy", "K", "z", "p", "sig");
    for &s in &strategies {
        if s == baseline {
            continue;
        }
        let (k, out) = &best[s.token()];
        let mut a = Vec::with_capacity(out.pairs.len());
        let mut b = Vec::with_capacity(out.pairs.len());
        for (p, &r) in out.pairs.iter().zip(&out.report.residuals) {
            let Some(&base_r) = base_by_id.get(p.id.as_str()) else {
                return Err(ebat::Error::InvalidArgument(format!(
                    "residuals are not paired: project {} missing from baseline",
                    p.id
                )));
            };
            a.push(base_r);
            b.push(r);
        }
        let w = wilcoxon_signed_rank(&a, &b)?;
        let marker = if w.low_n {
            ""
        } else if w.p < 0.01 {
            "a"
        } else if w.p < 0.05 {
            "b"
        } else {
            ""
        };
        lines.push(format!("{},{},{},{},{}", s.token(), k, w.z, w.p, marker));
        println!("{:<10} {:>3} {:>8.2} {:>10.4} {:>4}", s.token(), k, w.z, w.p, marker);
    }
    println!("a: significant at 1%, b: significant at 5%");
    write_file(&args.common.out.join("compare.csv"), &(lines.join("\n") + "\n"))?;
    Ok(())
}

fn cmd_inspect_tree(args: &InspectArgs) -> Result<()> {
    let d = load_clean(&args.common)?;
    let seeds = parse_seed_list(&args.seed)?;
    let seed = seeds[0];
    if args.fold >= args.folds {
        return Err(ebat::Error::InvalidArgument(format!(
            "fold index {} out of range for {} folds",
            args.fold, args.folds
        )));
    }
    let plan = make_folds(&d, args.folds, seed)?;
    let train_idx = plan.train_indices(args.fold);
    let train_raw = Dataset {
        schema: d.schema.clone(),
        projects: train_idx.iter().map(|&i| d.projects[i].clone()).collect(),
    };
    let normalizer = fit_normalizer(&train_raw)?;
    let train = apply_normalizer(&normalizer, &train_raw)?;
    let table = build_difference_table(&train)?;
    let tree = ModelTree::build(&table.to_training_matrix()?, &TreeParams::default())?;
    let dump = tree.dump();
    fs::create_dir_all(&args.common.out).map_err(|source| ebat::Error::Io {
        path: args.common.out.display().to_string(),
        source,
    })?;
    let path = args
        .common
        .out
        .join(format!("tree-fold{}-seed{}.txt", args.fold, seed));
    write_file(&path, &dump)?;
    print!("{dump}");
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|source| ebat::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::InspectTree(args) => cmd_inspect_tree(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ebat: {e}");
            ExitCode::FAILURE
        }
    }
}
