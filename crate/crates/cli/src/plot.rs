//! Whitespace-delimited `.xy` series plus a gnuplot stub, read back from a
//! run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempered::io::fmt17;

/// Coordinates are written per parameter only up to this dimension.
const MAX_THETA_SERIES: usize = 3;

/// Writes every series found in `dir` into `dir/plot` and returns the
/// written files in order.
pub fn emit_plot_data(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a run directory", dir.display());
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let sweep = dir.join("cold_sweep.csv");
    if sweep.exists() {
        series.extend(sweep_series(&sweep)?);
    }
    let trace = dir.join("trace.csv");
    if trace.exists() {
        series.extend(trace_series(&trace)?);
    }
    for (file, y) in [("loss.csv", "loss"), ("nelbo.csv", "nelbo")] {
        let p = dir.join(file);
        if p.exists() {
            series.push((y.to_string(), columns(&p, "step", y)?));
        }
    }
    for name in ["deep_ensemble", "serial", "parallel"] {
        let p = dir.join(format!("{name}.csv"));
        if p.exists() {
            series.push((name.to_string(), columns(&p, "theta_0", "theta_1")?));
        }
    }

    let out = dir.join("plot");
    std::fs::create_dir_all(&out)?;
    let mut written = Vec::with_capacity(series.len() + 1);
    let mut script = String::from("set key outside\n");
    for (name, points) in &series {
        let path = out.join(format!("{name}.xy"));
        let mut text = String::new();
        for (x, y) in points {
            writeln!(text, "{} {}", fmt17(*x), fmt17(*y)).expect("write to string");
        }
        std::fs::write(&path, text)?;
        writeln!(
            script,
            "plot '{name}.xy' using 1:2 with linespoints title '{name}'\npause -1"
        )
        .expect("write to string");
        written.push(path);
    }
    let gp = out.join("plot.gp");
    std::fs::write(&gp, script)?;
    written.push(gp);
    Ok(written)
}

/// One series per method: mean test loss over seeds against temperature.
fn sweep_series(path: &Path) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<(usize, u64), (f64, f64, usize)> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let method = rec.get(0).context("missing method")?.to_string();
        let t: f64 = rec.get(1).context("missing temperature")?.parse()?;
        let loss: f64 = rec.get(3).context("missing test_loss")?.parse()?;
        let m = match order.iter().position(|o| *o == method) {
            Some(i) => i,
            None => {
                order.push(method);
                order.len() - 1
            }
        };
        let e = acc.entry((m, ordered_bits(t))).or_insert((t, 0.0, 0));
        e.1 += loss;
        e.2 += 1;
    }
    Ok(order
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let pts = acc
                .range((i, 0)..=(i, u64::MAX))
                .map(|(_, (t, s, n))| (*t, s / *n as f64))
                .collect();
            (format!("sweep_{name}"), pts)
        })
        .collect())
}

// Bit pattern that sorts like the (non-negative) float.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if x.is_sign_negative() {
        !b
    } else {
        b | (1 << 63)
    }
}

fn trace_series(path: &Path) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let thetas: Vec<usize> = (0..header.len())
        .filter(|&i| header[i].starts_with("theta_"))
        .collect();
    let per_theta = thetas.len() <= MAX_THETA_SERIES;
    let mut log_post = Vec::new();
    let mut theta: Vec<Vec<(f64, f64)>> =
        vec![Vec::new(); if per_theta { thetas.len() } else { 0 }];
    for rec in r.records() {
        let rec = rec?;
        let step: f64 = rec[0].parse()?;
        log_post.push((step, rec[2].parse()?));
        for (j, col) in theta.iter_mut().enumerate() {
            col.push((step, rec[thetas[j]].parse()?));
        }
    }
    let mut out = vec![("trace_log_post".to_string(), log_post)];
    out.extend(
        theta
            .into_iter()
            .enumerate()
            .map(|(j, pts)| (format!("trace_theta_{j}"), pts)),
    );
    Ok(out)
}

fn columns(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no {name} column", path.display()))
    };
    let (ix, iy) = match (find(x), find(y)) {
        (Ok(ix), Ok(iy)) => (ix, iy),
        // an empty point set has only the leading column
        _ if header.len() <= 1 => return Ok(Vec::new()),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[ix].parse()?, rec[iy].parse()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_files_sorted_by_temperature() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("cold_sweep.csv"),
            "method,temperature,seed,test_loss,test_accuracy\n\
             vi,1,0,4,0.5\nvi,0.1,0,2,0.5\nvi,0.1,1,4,0.5\nmap,0.1,0,1,1\nmap,1,0,1,1\n",
        )
        .unwrap();
        let files = emit_plot_data(dir.path()).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, ["sweep_vi.xy", "sweep_map.xy", "plot.gp"]);
        let vi = std::fs::read_to_string(&files[0]).unwrap();
        let rows: Vec<Vec<f64>> = vi
            .lines()
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows, vec![vec![0.1, 3.0], vec![1.0, 4.0]]);
    }

    #[test]
    fn empty_trace_gives_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("trace.csv"), "step,epsilon,log_post\n").unwrap();
        let files = emit_plot_data(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), "");
    }

    #[test]
    fn float_order() {
        let mut v = [1.0, 0.03, 0.3, 0.0, 0.1];
        v.sort_by_key(|x| ordered_bits(*x));
        assert_eq!(v, [0.0, 0.03, 0.1, 0.3, 1.0]);
    }
}
