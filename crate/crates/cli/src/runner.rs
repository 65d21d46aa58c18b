//! Subcommand dispatch. Each run writes its artifacts and a manifest into
//! one output directory; stages are timed and the failing stage recorded.

use std::path::Path;
use std::time::Instant;

use anderson_core::besov::block_sup_norms;
use anderson_core::constants;
use anderson_core::control::{lebeau_rousseau_drive, spectral_inequality_probe, ControlProblem, ControlSet};
use anderson_core::eigen::{eigensolve, EigenSystem};
use anderson_core::gauge::{conjugation_residual, ground_gauge};
use anderson_core::grid::{GridField, TorusGrid};
use anderson_core::io::{csv_bytes, pgm_bytes, ArtifactSink};
use anderson_core::nodal::{argmin_abs, courant_check, doubling_index, nodal_domains, DELTA_SWEEP};
use anderson_core::noise::{enhance, Mollifier};
use anderson_core::operator::AndersonOperator;
use anderson_core::qc::{run_pipeline, PipelineConfig};
use anderson_core::verify::{factorization_ok, gaussian_field, run_suite, VerifySettings};
use anderson_core::{Error, Result};
use num_complex::Complex64;
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{Failure, RunManifest, StageTiming, Status};

/// Timed stages, artifact sink and check lines of one run.
pub struct Run {
    pub sink: ArtifactSink,
    pub stages: Vec<StageTiming>,
    pub checks: Vec<String>,
    failed_stage: Option<String>,
}

impl Run {
    pub fn new(sink: ArtifactSink) -> Self {
        Self {
            sink,
            stages: Vec::new(),
            checks: Vec::new(),
            failed_stage: None,
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if out.is_err() && self.failed_stage.is_none() {
            self.failed_stage = Some(name.to_string());
        }
        out
    }

    pub fn check(&mut self, pass: bool, line: String) {
        self.checks.push(format!("{} {line}", if pass { "PASS" } else { "FAIL" }));
    }

    fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.starts_with("PASS"))
    }
}

fn system(cfg: &RunConfig, seed: u64) -> Result<EigenSystem> {
    let grid = TorusGrid::new(cfg.grid.dim, cfg.grid.n)?;
    let noise = enhance(grid, seed, &Mollifier::new(cfg.noise.eps)?);
    eigensolve(&AndersonOperator::new(&noise), cfg.spectrum.num_eigs)
}

fn shape(grid: TorusGrid) -> Vec<usize> {
    vec![grid.n(); grid.dim()]
}

fn noise(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let grid = TorusGrid::new(cfg.grid.dim, cfg.grid.n)?;
    for &seed in &cfg.noise.seeds {
        run.stage(&format!("noise/seed_{seed}"), |run| {
            let en = enhance(grid, seed, &Mollifier::new(cfg.noise.eps)?);
            let dir = format!("noise/seed_{seed}");
            run.sink.put_raw(&format!("{dir}/xi"), &shape(grid), &en.xi_eps.values)?;
            run.sink
                .put_raw(&format!("{dir}/second_order"), &shape(grid), &en.second_order.values)?;
            let mean = en.xi_eps.mean();
            let variance = en.xi_eps.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / grid.len() as f64;
            run.sink.put_json(
                &format!("{dir}/summary.json"),
                &json!({
                    "seed": seed,
                    "eps": en.eps,
                    "c_eps": en.c_eps,
                    "mean": mean,
                    "variance": variance,
                    "block_sup_norms": block_sup_norms(&en.xi_eps.to_spectral()),
                }),
            )
        })?;
    }
    Ok(())
}

fn spectrum(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    for &seed in &cfg.noise.seeds {
        let es = run.stage(&format!("eigensolve/seed_{seed}"), |_| system(cfg, seed))?;
        run.stage(&format!("spectrum/seed_{seed}"), |run| {
            let dir = format!("spectrum/seed_{seed}");
            let rows: Vec<Vec<f64>> = (0..es.len()).map(|k| vec![k as f64, es.eigenvalues[k], es.residuals[k]]).collect();
            run.sink
                .put(&format!("{dir}/eigenvalues.csv"), &csv_bytes(&["k", "lambda", "residual"], &rows))?;
            for (k, u) in es.eigenvectors.iter().enumerate() {
                run.sink.put_raw(&format!("{dir}/u_{k}"), &shape(es.grid), &u.values)?;
            }
            let g = ground_gauge(&es);
            let positive = g.is_ok();
            let conj: Vec<f64> = match &g {
                Ok(g) => (0..es.len())
                    .map(|k| conjugation_residual(g, &es.eigenvectors[k], es.eigenvalues[k]))
                    .collect::<Result<_>>()?,
                Err(_) => Vec::new(),
            };
            run.sink.put_json(
                &format!("{dir}/summary.json"),
                &json!({
                    "seed": seed,
                    "eigenvalues": es.eigenvalues,
                    "residuals": es.residuals,
                    "orthonormality_defect": es.orthonormality_defect,
                    "ground_state_positive": positive,
                    "conjugation_residuals": conj,
                }),
            )?;
            run.check(positive, format!("seed {seed}: ground state positive"));
            Ok(())
        })?;
    }
    Ok(())
}

fn nodal(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    for &seed in &cfg.noise.seeds {
        let es = run.stage(&format!("eigensolve/seed_{seed}"), |_| system(cfg, seed))?;
        run.stage(&format!("nodal/seed_{seed}"), |run| {
            let dir = format!("nodal/seed_{seed}");
            let report = courant_check(&es, cfg.nodal.delta)?;
            let sweep = DELTA_SWEEP.iter().map(|&d| courant_check(&es, d)).collect::<Result<Vec<_>>>()?;
            let n = es.grid.n();
            let height = if es.grid.dim() == 2 { n } else { 1 };
            for (k, u) in es.eigenvectors.iter().enumerate() {
                let d = nodal_domains(u, cfg.nodal.delta)?;
                run.sink.put(&format!("{dir}/labels_{k}.pgm"), &pgm_bytes(n, height, &d.labels)?)?;
            }
            let doubling = es.eigenvectors[1..]
                .iter()
                .map(|u| doubling_index(u, argmin_abs(u), &cfg.nodal.radii))
                .collect::<Result<Vec<_>>>()?;
            run.sink.put_json(
                &format!("{dir}/courant.json"),
                &json!({"report": report, "sweep": sweep, "doubling": doubling}),
            )?;
            let violations = report.entries.iter().filter(|e| !e.pass).count();
            let flips: usize = sweep
                .iter()
                .map(|r| r.entries.iter().zip(&report.entries).filter(|(a, b)| a.pass != b.pass).count())
                .sum();
            run.check(
                violations == 0 && flips == 0,
                format!("seed {seed}: {violations} Courant violations, {flips} verdict changes across the delta sweep"),
            );
            Ok(())
        })?;
    }
    Ok(())
}

fn qc(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let pcfg = PipelineConfig {
        radius: cfg.qc.radius,
        m: cfg.qc.m,
        delta: cfg.qc.delta,
        ..PipelineConfig::default()
    };
    for &seed in &cfg.noise.seeds {
        let es = run.stage(&format!("eigensolve/seed_{seed}"), |_| system(cfg, seed))?;
        let k = cfg.qc.k;
        let p = run.stage(&format!("pipeline/seed_{seed}"), |_| {
            let g = ground_gauge(&es)?;
            let x0 = cfg.qc.center.unwrap_or_else(|| argmin_abs(&es.eigenvectors[k]));
            run_pipeline(&es, &g, k, x0, &pcfg)
        })?;
        run.stage(&format!("qc/seed_{seed}"), |run| {
            let dir = format!("qc/seed_{seed}");
            let r = &p.report;
            run.sink.put_json(&format!("{dir}/report.json"), r)?;
            let m = p.patch.m;
            run.sink.put_raw(&format!("{dir}/v"), &[m, m], &p.v)?;
            run.sink.put_raw(&format!("{dir}/sigma"), &[m, m], &p.sigma)?;
            let pair = |run: &mut Run, name: &str, n: usize, z: &[Complex64]| -> Result<()> {
                let re: Vec<f64> = z.iter().map(|c| c.re).collect();
                let im: Vec<f64> = z.iter().map(|c| c.im).collect();
                run.sink.put_raw(&format!("{dir}/{name}_re"), &[n, n], &re)?;
                run.sink.put_raw(&format!("{dir}/{name}_im"), &[n, n], &im)
            };
            pair(run, "mu", p.beltrami.grid.n, &p.beltrami.mu)?;
            pair(run, "chi", p.solution.grid.n, &p.solution.chi)?;
            pair(run, "h", p.factor.zeta_grid.n, &p.factor.h)?;
            let sup = p.v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let overlay: Vec<u32> =
                p.v.iter()
                    .map(|v| match v.abs() <= cfg.qc.delta * sup {
                        true => 0,
                        false if *v < 0.0 => 1,
                        false => 2,
                    })
                    .collect();
            run.sink.put(&format!("{dir}/sign_v.pgm"), &pgm_bytes(m, m, &overlay)?)?;
            run.check(
                factorization_ok(r),
                format!(
                    "seed {seed}: residual_beltrami {:.1e}, CR {:.1e}, harmonicity {:.1e}, agreement {:.4}",
                    r.residual_beltrami, r.residual_cr, r.harmonicity, r.correspondence.agreement
                ),
            );
            Ok(())
        })?;
    }
    Ok(())
}

fn control(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let c = &cfg.control;
    for &seed in &cfg.noise.seeds {
        let es = run.stage(&format!("eigensolve/seed_{seed}"), |_| system(cfg, seed))?;
        let omega = ControlSet::interval(es.grid, c.omega[0], c.omega[1])?;
        let dir = format!("control/seed_{seed}");
        let probe = run.stage(&format!("specineq/seed_{seed}"), |_| {
            let lambdas = if c.lambdas.is_empty() {
                es.eigenvalues.clone()
            } else {
                c.lambdas.clone()
            };
            spectral_inequality_probe(&es, &omega, &lambdas, c.trials, seed)
        })?;
        let g0 = gaussian_field(es.grid, seed);
        let result = run.stage(&format!("drive/seed_{seed}"), |_| {
            let problem = ControlProblem {
                omega: omega.clone(),
                horizon: c.horizon,
                g0: g0.clone(),
                modes: c.modes,
            };
            lebeau_rousseau_drive(&es, &problem)
        })?;
        run.stage(&format!("control/seed_{seed}"), |run| {
            let mode_names: Vec<String> = (0..c.modes).map(|k| format!("a_{k}")).collect();
            let mut header = vec!["t"];
            header.extend(mode_names.iter().map(String::as_str));
            let tr = &result.trajectory;
            let traj: Vec<Vec<f64>> = tr
                .times
                .iter()
                .zip(&tr.coeffs)
                .map(|(t, a)| std::iter::once(*t).chain(a.iter().copied()).collect())
                .collect();
            run.sink.put(&format!("{dir}/trajectory.csv"), &csv_bytes(&header, &traj))?;
            // control as the mode table F_k(t) = ⟨f(t), u_k⟩
            let load_names: Vec<String> = (0..c.modes).map(|k| format!("f_{k}")).collect();
            let mut header = vec!["t"];
            header.extend(load_names.iter().map(String::as_str));
            let loads: Vec<Vec<f64>> = tr
                .times
                .iter()
                .map(|&t| {
                    let f: GridField = result.control_at(&es, &omega, t);
                    std::iter::once(t)
                        .chain(es.eigenvectors[..c.modes].iter().map(|u| f.dot(u)))
                        .collect()
                })
                .collect();
            run.sink.put(&format!("{dir}/control.csv"), &csv_bytes(&header, &loads))?;
            run.sink.put_json(
                &format!("{dir}/summary.json"),
                &json!({
                    "terminal_norm": result.terminal_norm,
                    "initial_norm": g0.norm(),
                    "cost": result.cost,
                    "cost_ratio": result.cost_ratio,
                    "tail_norm": result.tail_norm,
                    "tail_bound": result.tail_bound,
                    "C_fit": probe.c_fit,
                    "c0": probe.c0,
                    "spectral_inequality": probe,
                    "stages": result.stages,
                }),
            )?;
            let rel = result.terminal_norm / g0.norm();
            run.check(rel <= 1e-6, format!("seed {seed}: terminal norm {rel:.2e} of initial (tol 1e-6)"));
            run.check(
                probe.violations == 0,
                format!("seed {seed}: {} spectral inequality envelope violations", probe.violations),
            );
            Ok(())
        })?;
    }
    Ok(())
}

fn verify(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let settings = VerifySettings {
        seed: cfg.noise.seeds[0],
        criteria: cfg.verify.criteria.clone(),
    };
    let report = run.stage("verify", |run| {
        run_suite(&settings, &mut run.sink, |r| {
            println!("{}", r.line());
        })
    })?;
    for r in &report.criteria {
        run.stages.push(StageTiming {
            stage: format!("criterion_{:02}", r.id),
            seconds: r.elapsed_s,
        });
        run.check(r.passed(), format!("criterion {:02} {}: {}", r.id, r.title, r.summary));
    }
    Ok(())
}

/// Runs `subcommand` into `out`; the manifest is written in every case.
pub fn run(subcommand: &str, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let mut run = Run::new(ArtifactSink::to_dir(out)?);
    let result = match subcommand {
        "noise" => noise(cfg, &mut run),
        "spectrum" => spectrum(cfg, &mut run),
        "nodal" => nodal(cfg, &mut run),
        "qc" => qc(cfg, &mut run),
        "control" => control(cfg, &mut run),
        "verify" => verify(cfg, &mut run),
        other => Err(Error::Config(format!("unknown subcommand {other}"))),
    };
    let failure = result.err().map(|e| Failure {
        stage: run.failed_stage.clone().unwrap_or_else(|| subcommand.to_string()),
        error: e.to_string(),
    });
    let status = match (&failure, run.all_pass()) {
        (Some(_), _) => Status::Failed,
        (None, false) => Status::ChecksFailed,
        (None, true) => Status::Ok,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config: cfg.clone(),
        constants: serde_json::to_value(constants::echo())?,
        status,
        failure,
        checks: run.checks.clone(),
        stages: run.stages.clone(),
        artifacts: run.sink.records().to_vec(),
    };
    manifest.write(out)?;
    Ok(manifest)
}
