//! Data behind the three published figures, one CSV per panel group.

use std::path::Path;

use colombeau::genfunc::{evaluate_grid, GeneralizedFunction as Gf};
use colombeau::jets::SmoothPrimitive;
use colombeau::mollifier::{scale, TestFunction};

use crate::output::{num, write_atomic, Format, Table};
use crate::{base_phi, CliError};

pub const SAMPLES: usize = 401;
pub const THETA_EPS: f64 = 0.1;
pub const SMOOTHED_EPS: [f64; 2] = [0.2, 0.1];
pub const ERROR_EPS: [f64; 2] = [0.02, 0.01];

pub const FILES: [&str; 5] = [
    "fig1_phi1.csv",
    "fig1_phi3.csv",
    "fig2_heaviside.csv",
    "fig3_smoothed.csv",
    "fig3_error.csv",
];

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut ys: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    ys[n - 1] = hi;
    ys
}

fn eval_column(g: &Gf, phi: &TestFunction, eps: f64, ys: &[f64]) -> Result<Vec<f64>, CliError> {
    let k = scale(phi, eps)?;
    Ok(evaluate_grid(g, &k, ys, 0)?)
}

fn table(header: Vec<String>, columns: &[Vec<f64>]) -> Table {
    let mut t = Table::new(header);
    for i in 0..columns[0].len() {
        t.push(columns.iter().map(|c| num(c[i])).collect());
    }
    t
}

/// Samples of `phi` and `phi'` across its support.
pub fn phi_table(phi: &TestFunction, samples: usize) -> Table {
    let (a, b) = phi.support();
    let xs = grid(a, b, samples);
    let mut t = Table::new(["x", "phi", "deriv1"]);
    for x in xs {
        let j = phi.jet(x, 1);
        t.push_numbers(&[x, j.value(), j.derivative(1)]);
    }
    t
}

pub fn emit(outdir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(outdir).map_err(|source| CliError::Io {
        path: outdir.to_path_buf(),
        source,
    })?;
    let phi1 = base_phi(1, 1.0)?;
    let phi3 = base_phi(3, 1.0)?;
    let ys = grid(-1.0, 1.0, SAMPLES);
    let write = |name: &str, t: &Table| write_atomic(&outdir.join(name), &t.render(Format::Csv));

    write(FILES[0], &phi_table(&phi1, SAMPLES))?;
    write(FILES[1], &phi_table(&phi3, SAMPLES))?;

    let theta: Vec<f64> = ys.iter().map(|&y| if y >= 0.0 { 1.0 } else { 0.0 }).collect();
    let th = Gf::heaviside();
    let thetabar = eval_column(&th, &phi1, THETA_EPS, &ys)?;
    let thetabar_sq = eval_column(&(th.clone() * th), &phi1, THETA_EPS, &ys)?;
    write(
        FILES[2],
        &table(
            vec!["y".into(), "theta".into(), "thetabar".into(), "thetabar_sq".into()],
            &[ys.clone(), theta, thetabar, thetabar_sq],
        ),
    )?;

    let f = SmoothPrimitive::TanhScaled(10.0);
    let bar = Gf::bar(f.clone());
    let diff = bar.clone() - Gf::tilde(f.clone());
    let bases = [("q1", &phi1), ("q3", &phi3)];

    let mut header = vec!["y".to_string(), "f".to_string()];
    let mut cols = vec![ys.clone(), ys.iter().map(|&y| f.value(y)).collect()];
    for (label, phi) in bases {
        for eps in SMOOTHED_EPS {
            header.push(format!("{label}_eps{eps}"));
            cols.push(eval_column(&bar, phi, eps, &ys)?);
        }
    }
    write(FILES[3], &table(header, &cols))?;

    let mut header = vec!["y".to_string()];
    let mut cols = vec![ys.clone()];
    for (label, phi) in bases {
        for eps in ERROR_EPS {
            header.push(format!("{label}_eps{eps}"));
            cols.push(eval_column(&diff, phi, eps, &ys)?);
        }
    }
    write(FILES[4], &table(header, &cols))?;
    Ok(())
}
