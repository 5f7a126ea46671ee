//! Dataset builders, one per subcommand.

use anyhow::Result;
use rayon::prelude::*;
use serde_json::{json, Value};
use voi_core::suites::{run_suite, SuiteOptions, SuiteReport};
use voi_core::*;

use crate::output::{Cell, Dataset, Format, SCHEMA};
use crate::params::{
    DeeperParams, Family, KlParams, SingletonParams, SweepParams, VerifyParams, VersusParams,
};

fn echo<P: serde::Serialize>(params: &P) -> Value {
    serde_json::to_value(params).expect("parameters serialize")
}

fn geometric(k: usize, alpha: f64) -> Result<EigenPrior64> {
    Ok(prior_geometric(k, alpha, Matrix::identity(k))?)
}

/// Divergence from the flat prior against `K`, one wide row per `K`.
pub fn fig_kl(p: &KlParams) -> Result<Dataset> {
    let mut columns = vec!["K".to_owned(), "d_random_walk".into(), "rho_eq".into()];
    columns.extend(p.rho_grid.iter().map(|r| format!("d_pairwise_rho_{r}")));
    let mut data = Dataset::new("fig-kl", echo(p), columns);
    for k in 2..=p.k_max {
        let step = 2.0 * p.sigma_m2 / (k as f64 + 1.0);
        let walk = prior_random_walk(k, step, 0.0)?;
        let mut row: Vec<Cell> = vec![
            k.into(),
            kl_divergence_to_naive(&walk).into(),
            equivalent_pairwise_correlation(&walk).into(),
        ];
        row.extend(
            p.rho_grid
                .iter()
                .map(|&r| Cell::from(pairwise_kl_divergence(k, r))),
        );
        data.push(row);
    }
    Ok(data)
}

/// Value of `J`-deep knowledge for each decay rate and sample size.
pub fn fig_deeper(p: &DeeperParams) -> Result<Dataset> {
    let jobs: Vec<(f64, f64)> = p
        .alphas
        .iter()
        .flat_map(|&a| p.n_list.iter().map(move |&n| (a, n)))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|&(alpha, n)| -> Result<Vec<Vec<Cell>>> {
            let prior = geometric(p.k, alpha)?;
            let report = value_report(&prior, n, p.sigma_u2, 0..=p.k)?;
            let profile = rank_profile(&prior, n, p.sigma_u2)?;
            Ok(report
                .per_depth
                .values()
                .map(|d| {
                    vec![
                        alpha.into(),
                        n.into(),
                        d.depth.into(),
                        d.rank.into(),
                        d.value.into(),
                        d.pi.into(),
                        profile.optimal_rank.into(),
                    ]
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::new(
        "fig-deeper",
        echo(p),
        ["alpha", "n", "J", "rank_J", "value_J", "pi_J", "r_star"],
    );
    blocks.into_iter().flatten().for_each(|row| data.push(row));
    Ok(data)
}

/// Smallest sample reaching each target value, against depth.
pub fn fig_versus(p: &VersusParams) -> Result<Dataset> {
    let jobs: Vec<(f64, f64)> = p
        .alphas
        .iter()
        .flat_map(|&a| p.targets.iter().map(move |&t| (a, t)))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|&(alpha, target)| -> Result<Vec<Vec<Cell>>> {
            let prior = geometric(p.k, alpha)?;
            (0..=p.k)
                .map(|j| {
                    let n = min_sample_size(&jdeep(&prior, j)?, p.sigma_u2, target)?;
                    let status = if n.value().is_some() {
                        "attainable"
                    } else {
                        "unattainable"
                    };
                    Ok(vec![
                        alpha.into(),
                        target.into(),
                        j.into(),
                        n.value().into(),
                        n.ceil().value().into(),
                        status.into(),
                    ])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::new(
        "fig-versus",
        echo(p),
        ["alpha", "pi0", "J", "n_min", "n_min_whole", "status"],
    );
    blocks.into_iter().flatten().for_each(|row| data.push(row));
    Ok(data)
}

/// Value of one observation `w = (sin πt, cos πt)` for two correlated states.
pub fn fig_singleton(p: &SingletonParams) -> Result<Dataset> {
    let prior = prior_pairwise(2, p.sigma_m2, p.rho)?;
    let mut data = Dataset::new("fig-singleton", echo(p), ["t", "w1", "w2", "value"]);
    for t in p.grid() {
        let (w1, w2) = (std::f64::consts::PI * t).sin_cos();
        let value = singleton_value(&prior, &[w1, w2], p.sigma_u2)?;
        data.push(vec![t.into(), w1.into(), w2.into(), value.into()]);
    }
    Ok(data)
}

/// Long-form knowledge values for one prior family across precisions and depths.
pub fn sweep(p: &SweepParams) -> Result<Dataset> {
    let prior = match p.family {
        Family::Pairwise => prior_pairwise(p.k, p.sigma_m2, p.rho)?,
        Family::Geometric => geometric(p.k, p.alpha)?,
        Family::RandomWalk => prior_random_walk(p.k, p.nu2, 0.0)?,
    };
    let depths: Vec<usize> = if p.depths.is_empty() {
        (0..=p.k).collect()
    } else {
        p.depths.clone()
    };
    let mean = prior.mean_eigenvalue();
    let blocks = p
        .taus
        .par_iter()
        .map(|&tau| -> Result<Vec<Vec<Cell>>> {
            let n = tau * p.sigma_u2 / mean;
            let r = value_report(&prior, n, p.sigma_u2, depths.iter().copied())?;
            Ok(r.per_depth
                .values()
                .map(|d| {
                    vec![
                        tau.into(),
                        n.into(),
                        d.depth.into(),
                        d.rank.into(),
                        d.pi.into(),
                        d.value.into(),
                        r.pi_star.into(),
                        r.pi_naive.into(),
                        r.knowledge_value.into(),
                    ]
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let columns = [
        "tau",
        "n",
        "depth",
        "rank",
        "pi_depth",
        "value_depth",
        "pi_star",
        "pi_naive",
        "knowledge_value",
    ];
    let mut data = Dataset::new("sweep", echo(p), columns);
    blocks.into_iter().flatten().for_each(|row| data.push(row));
    Ok(data)
}

/// Verification outcome and its rendering.
pub struct Verification {
    pub passed: bool,
    pub text: String,
}

pub fn verify(p: &VerifyParams, seed: u64, draws: usize, format: Format) -> Result<Verification> {
    let suites = p.suites()?;
    let options = SuiteOptions {
        seed,
        draws,
        verbose: p.verbose,
    };
    let reports: Vec<SuiteReport> = suites.iter().map(|&s| run_suite(s, &options)).collect();
    let passed = reports.iter().all(|r| r.passed);
    let text = match format {
        Format::Json => crate::output::pretty(&json!({
            "schema": SCHEMA,
            "command": "verify",
            "seed": seed,
            "draws": draws,
            "passed": passed,
            "suites": reports,
        })),
        Format::Csv => {
            let params =
                json!({ "suites": suites, "verbose": p.verbose, "seed": seed, "draws": draws });
            let mut data = Dataset::new("verify", params, ["suite", "cases", "failures", "passed"]);
            for r in &reports {
                data.push(vec![
                    r.suite.name().into(),
                    r.cases.into(),
                    r.failures.into(),
                    r.passed.into(),
                ]);
            }
            data.render(Format::Csv)
        }
    };
    Ok(Verification { passed, text })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(c: &Cell) -> f64 {
        match c {
            Cell::Num(v) => *v,
            Cell::Int(v) => *v as f64,
            other => panic!("not numeric: {other:?}"),
        }
    }

    #[test]
    fn kl_has_one_row_per_dimension() {
        let d = fig_kl(&KlParams {
            k_max: 6,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(d.rows.len(), 5);
        assert_eq!(d.columns.len(), 3 + 10);
        assert_eq!(d.columns[3], "d_pairwise_rho_0");
        assert_eq!(num(&d.rows[0][3]), 0.0);
    }

    #[test]
    fn singleton_extremes() {
        let d = fig_singleton(&SingletonParams::default()).unwrap();
        let at = |t: f64| {
            d.rows
                .iter()
                .find(|r| num(&r[0]) == t)
                .map(|r| num(&r[3]))
                .unwrap()
        };
        assert!((at(0.25) - 0.45).abs() < 1e-12);
        assert!((at(-0.25) - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn versus_rows_cover_every_depth() {
        let p = VersusParams {
            k: 10,
            alphas: vec![0.1],
            targets: vec![0.5, 2.0],
            ..Default::default()
        };
        let d = fig_versus(&p).unwrap();
        assert_eq!(d.rows.len(), 2 * 11);
        assert_eq!(d.rows[11][5], Cell::from("unattainable"));
        assert_eq!(d.rows[11][3], Cell::Missing);
    }

    #[test]
    fn sweep_selected_depths() {
        let p = SweepParams {
            k: 5,
            depths: vec![0, 5],
            taus: vec![1.0, 10.0],
            ..Default::default()
        };
        let d = sweep(&p).unwrap();
        assert_eq!(d.rows.len(), 4);
        assert_eq!(num(&d.rows[0][5]), 0.0);
    }
}
