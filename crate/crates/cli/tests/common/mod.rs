#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use tempered::base::RngStream;
use tempered::models::{
    mlp_classifier, two_moons, Activation, Dataset, GaussianPrior, LinearGaussianRegression, Mlp,
};
use tempered_cli::{load_config, run_config};

/// Polynomial schedule `a (b + k)^-γ` used for the Robbins–Monro check.
pub const RM_A: f64 = 8.0;
pub const RM_B: f64 = 1000.0;

/// Constant step of the serial double-well chain.
pub const SERIAL_EPS: f64 = 5e-5;

pub fn moons_split(seed: u64) -> (Dataset, Dataset) {
    (
        two_moons(64, 0.2, 0.0, seed),
        two_moons(200, 0.2, 0.0, seed + 1000),
    )
}

pub fn classifier(prior_var: f64) -> Mlp {
    let sizes = vec![2, 16, 2];
    let d = 2 * 16 + 16 + 16 * 2 + 2;
    mlp_classifier(
        sizes,
        Activation::Tanh,
        Some(GaussianPrior::isotropic(d, prior_var).unwrap()),
    )
    .unwrap()
}

pub fn conjugate_problem(n: usize, seed: u64) -> (LinearGaussianRegression, Dataset) {
    let mut rng = RngStream::new(seed, 0);
    let truth = [1.0, -2.0];
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.standard_normal(), rng.standard_normal()])
        .collect();
    let targets = inputs
        .iter()
        .map(|x| truth[0] * x[0] + truth[1] * x[1] + rng.standard_normal())
        .collect();
    let model =
        LinearGaussianRegression::new(1.0, GaussianPrior::isotropic(2, 1.0).unwrap()).unwrap();
    (model, Dataset::new(inputs, targets).unwrap())
}

pub fn orthogonal_prior() -> &'static GaussianPrior {
    static PRIOR: std::sync::OnceLock<GaussianPrior> = std::sync::OnceLock::new();
    PRIOR.get_or_init(|| GaussianPrior::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap())
}

/// Eight rows whose two columns are orthogonal ±1 patterns.
pub fn orthogonal_problem() -> (LinearGaussianRegression, Dataset) {
    let c1 = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let c2 = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
    let noise = [0.3, -0.1, 0.2, 0.05, -0.4, 0.1, -0.2, 0.25];
    let inputs = (0..8).map(|i| vec![c1[i], c2[i]]).collect();
    let targets = (0..8)
        .map(|i| 1.5 * c1[i] - 0.8 * c2[i] + noise[i])
        .collect();
    let model = LinearGaussianRegression::new(0.5, orthogonal_prior().clone()).unwrap();
    (model, Dataset::new(inputs, targets).unwrap())
}

pub fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|e| format!("{s:?}: {e}"))
}

/// Shipped sweep config: 4 temperatures x 5 methods x 3 seeds, then the
/// MAP-vs-MLE and finite-Laplace checks.
pub fn cold_sweep() -> Result<String, String> {
    let cfg = load_config(&config_dir().join("cold_sweep.toml")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_config(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let rows = csv_rows(&dir.path().join("cold_sweep.csv"))?;
    let temps = [0.03, 0.1, 0.3, 1.0];
    let methods = ["map", "laplace-ggn", "vi", "sghmc-serial", "sghmc-parallel"];
    let seeds = [0u64, 1, 2];
    if rows.len() != temps.len() * methods.len() * seeds.len() {
        return Err(format!("{} rows", rows.len()));
    }
    for m in methods {
        for t in temps {
            for s in seeds {
                let hit = rows
                    .iter()
                    .filter(|r| r[0] == m && num(&r[1]).ok() == Some(t) && r[2] == s.to_string())
                    .count();
                if hit != 1 {
                    return Err(format!("cell ({m}, {t}, {s}) appears {hit} times"));
                }
            }
        }
    }
    for r in &rows {
        let (loss, acc) = (num(&r[3])?, num(&r[4])?);
        if !loss.is_finite() || !(0.0..=1.0).contains(&acc) {
            return Err(format!("bad row {r:?}"));
        }
    }
    let mle = csv_rows(&dir.path().join("mle_baseline.csv"))?;
    let mut worst_gap = f64::INFINITY;
    for s in seeds {
        let map_loss = rows
            .iter()
            .find(|r| r[0] == "map" && r[2] == s.to_string())
            .map(|r| num(&r[3]))
            .unwrap()?;
        let mle_loss = mle
            .iter()
            .find(|r| r[0] == s.to_string())
            .ok_or(format!("no MLE row for seed {s}"))
            .and_then(|r| num(&r[1]))?;
        if map_loss >= mle_loss {
            return Err(format!(
                "seed {s}: MAP loss {map_loss:.4} >= MLE loss {mle_loss:.4}"
            ));
        }
        worst_gap = worst_gap.min(mle_loss - map_loss);
    }
    let laplace_max = rows
        .iter()
        .filter(|r| r[0] == "laplace-ggn")
        .map(|r| num(&r[3]))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(format!(
        "60 cells; MAP beats MLE by >= {worst_gap:.3} nats; Laplace loss <= {laplace_max:.3}"
    ))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Runs every shipped config, reruns each from its manifest through the
/// binary, and compares all files byte for byte.
pub fn reproducibility() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(config_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort_by_key(|p| (p.file_stem().unwrap() == "predict", p.clone()));
    let mut compared = 0;
    for path in &names {
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let mut cfg = load_config(path).map_err(|e| format!("{stem}: {e}"))?;
        if let Some(p) = &mut cfg.predict {
            p.artifact = tmp.path().join("laplace");
        }
        let first = tmp.path().join(&stem);
        run_config(&cfg, &first).map_err(|e| format!("{stem}: {e}"))?;
        let second = tmp.path().join(format!("{stem}_rerun"));
        let status = Command::new(env!("CARGO_BIN_EXE_engine"))
            .arg("run")
            .arg(first.join("manifest.json"))
            .arg("--out")
            .arg(&second)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "{stem}: rerun failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        let (a, b) = (files_under(&first), files_under(&second));
        if a != b {
            return Err(format!("{stem}: file sets differ: {a:?} vs {b:?}"));
        }
        for f in &a {
            if std::fs::read(first.join(f)).unwrap() != std::fs::read(second.join(f)).unwrap() {
                return Err(format!("{stem}: {} differs", f.display()));
            }
        }
        compared += a.len();
    }
    Ok(format!(
        "{} configs, {compared} files byte-identical",
        names.len()
    ))
}
