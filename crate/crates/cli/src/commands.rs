use std::fs;
use std::path::{Path, PathBuf};

use kernelcomp::io::{load_matrix, save_matrix};
use kernelcomp::simulation::write_plot_csv;
use kernelcomp::{
    canonical_completion, estimate_canonical, pairwise_empirical, perturbed_completion,
    run_experiment, uniqueness_check, ContractionSet, DomainSpec, Error, ExperimentConfig,
    ExperimentReport, FragmentSet, MergeOrder, PartialCovariance, Result, SerratedDomain,
    SymMatrix, TruncationRule,
};
use serde_json::json;

fn load_domain(path: &Path) -> Result<SerratedDomain> {
    DomainSpec::from_json(&fs::read_to_string(path)?)?.build()
}

fn load_partial(matrix: &Path, domain: &Path) -> Result<PartialCovariance> {
    let domain = load_domain(domain)?;
    let m = load_matrix(matrix)?;
    let n = domain.grid().n();
    if m.nrows() != n {
        return Err(Error::Shape(format!(
            "matrix has dimension {} but the domain grid has {n} nodes",
            m.nrows()
        )));
    }
    PartialCovariance::new(domain, SymMatrix::new(m)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn parse_order(s: &str) -> Result<MergeOrder> {
    match s.trim() {
        "ascending" | "asc" => Ok(MergeOrder::Ascending),
        "descending" | "desc" => Ok(MergeOrder::Descending),
        list => list
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad merge order {s:?}")))
            })
            .collect::<Result<_>>()
            .map(MergeOrder::Explicit),
    }
}

pub fn complete(matrix: &Path, domain: &Path, order: &str, out: &Path) -> Result<()> {
    let order = parse_order(order)?;
    let pc = load_partial(matrix, domain)?;
    let res = canonical_completion(&pc, &order)?;
    save_matrix(res.kernel.as_matrix(), out)?;
    write_json(&sidecar(out), &res.diagnostics_json())
}

pub fn estimate(
    fragments: &Path,
    domain: &Path,
    rule: &str,
    min_count: usize,
    out: &Path,
) -> Result<()> {
    let domain = load_domain(domain)?;
    let frags = FragmentSet::read_csv(domain.grid().clone(), fs::File::open(fragments)?)?;
    let rule = match rule.parse::<TruncationRule>()? {
        TruncationRule::Schedule {
            alpha, beta, scale, ..
        } => TruncationRule::Schedule {
            n: frags.len(),
            alpha,
            beta,
            scale,
        },
        other => other,
    };
    let est = pairwise_empirical(&frags, min_count)?;
    let res = estimate_canonical(&est, &domain, &rule)?;
    save_matrix(res.kernel.as_matrix(), out)?;
    let steps: Vec<_> = res
        .per_step
        .iter()
        .map(|s| {
            json!({
                "p": s.p,
                "N_p": s.rank_used,
                "lambda_N_p": s.lambda_cutoff,
                "lambda_min_j": s.lambda_min_j,
                "separation_residual_max": s.separation_residual_max,
            })
        })
        .collect();
    write_json(
        &sidecar(out),
        &json!({
            "rule": rule.to_string(),
            "n_curves": frags.len(),
            "min_count": min_count,
            "steps": steps,
            "min_eigenvalue": res.min_eigenvalue,
            "warnings": res.warnings,
        }),
    )
}

pub fn simulate(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_json(&fs::read_to_string(config)?)?;
    let report = run_experiment(&cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut text = report.to_json()?;
    text.push('\n');
    fs::write(out_dir.join("report.json"), text)?;
    report.write_replications_csv(fs::File::create(out_dir.join("replications.csv"))?)?;
    write_plot_csv(
        std::slice::from_ref(&report),
        fs::File::create(out_dir.join("plot.csv"))?,
    )
}

pub fn check_unique(matrix: &Path, domain: &Path, tol: f64, out: Option<&Path>) -> Result<()> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let pc = load_partial(matrix, domain)?;
    let report = serde_json::to_value(uniqueness_check(&pc, tol)?)?;
    match out {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

pub fn perturb(
    matrix: &Path,
    domain: &Path,
    norm: f64,
    seed: u64,
    count: usize,
    out: &Path,
) -> Result<()> {
    // validate before any work
    let _ = kernelcomp::random_contraction(1, 1, norm, seed)?;
    let pc = load_partial(matrix, domain)?;
    let canon = canonical_completion(&pc, &MergeOrder::Ascending)?;
    fs::create_dir_all(out)?;
    let width = count.saturating_sub(1).to_string().len().max(3);
    for i in 0..count {
        let psis = ContractionSet::random(pc.domain(), norm, seed.wrapping_add(i as u64))?;
        let k = perturbed_completion(&canon, &pc, &psis)?;
        save_matrix(
            k.as_matrix(),
            &out.join(format!("completion_{i:0width$}.csv")),
        )?;
    }
    Ok(())
}

pub fn export_plot(reports: &[&Path], out: &Path) -> Result<()> {
    let reports: Vec<ExperimentReport> = reports
        .iter()
        .map(|p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))
        .collect::<Result<_>>()?;
    write_plot_csv(&reports, fs::File::create(out)?)
}
