//! Acceptance gate: every criterion runs at its stated tolerance and reports
//! one PASS/FAIL line. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use colombeau::asymptotics::{
    classify, estimate_order, standard_bases, ClassifyOptions, Resolution, Verdict,
};
use colombeau::exprlang::{parse, to_dag, Expr, FuncRef, FunctionRegistry};
use colombeau::genfunc::{evaluate, evaluate_grid, GeneralizedFunction as Gf};
use colombeau::jets::SmoothPrimitive;
use colombeau::mollifier::{construct_aq, make_bump, moments, scale, translate, Kernel, TestFunction};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_colombeau"))
}

fn bump() -> TestFunction {
    make_bump(1.0).unwrap()
}

fn phi_q(q: usize) -> TestFunction {
    construct_aq(q, &bump()).unwrap()
}

/// Composite trapezoid rule; spectrally accurate for compactly supported
/// smooth integrands and independent of the library quadrature.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + h * i as f64);
    }
    s * h
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect::<Vec<_>>();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, cell) in cols.iter_mut().zip(line.split(',')) {
            c.push(cell.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn column<'a>(csv: &'a (Vec<String>, Vec<Vec<f64>>), name: &str) -> &'a [f64] {
    let i = csv.0.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    &csv.1[i]
}

fn criterion_1() -> Outcome {
    let mut worst_m0 = 0.0f64;
    let mut worst_mr = 0.0f64;
    for q in 1..=6 {
        let phi = phi_q(q);
        let lib = moments(&phi, q).map_err(|e| e.to_string())?;
        for r in 0..=q {
            let trap = trapezoid(|x| x.powi(r as i32) * phi.value(x), -1.0, 1.0, 20_000);
            for m in [lib[r], trap] {
                if r == 0 {
                    worst_m0 = worst_m0.max((m - 1.0).abs());
                } else {
                    worst_mr = worst_mr.max(m.abs());
                }
            }
        }
        for (k, l) in phi.lambda().iter().enumerate() {
            ensure(k % 2 == 0 || *l == 0.0, || format!("q={q}: odd lambda[{k}] = {l:e}"))?;
        }
    }
    ensure(worst_m0 <= 1e-10, || format!("|m0 - 1| = {worst_m0:e} > 1e-10"))?;
    ensure(worst_mr <= 1e-8, || format!("max |m_r| = {worst_mr:e} > 1e-8"))?;
    Ok(format!(
        "q=1..6: max|m0-1|={worst_m0:.1e}, max|m_r|={worst_mr:.1e}, odd lambda exactly 0"
    ))
}

fn criterion_2() -> Outcome {
    let res = Resolution::default();
    let mut notes = Vec::new();
    for (label, phi) in [("A1", bump()), ("A3", phi_q(3))] {
        let d = estimate_order(&Gf::delta(), &phi, &res, 0).map_err(|e| e.to_string())?;
        ensure((d.slope + 1.0).abs() <= 0.01, || format!("{label}: delta slope {}", d.slope))?;
        let d2 = estimate_order(&(Gf::delta() * Gf::delta()), &phi, &res, 0).map_err(|e| e.to_string())?;
        ensure((d2.slope + 2.0).abs() <= 0.02, || format!("{label}: delta^2 slope {}", d2.slope))?;
        notes.push(format!("{label} delta {:.4} delta^2 {:.4}", d.slope, d2.slope));
        for n in 0..=2 {
            let e = estimate_order(&Gf::delta(), &phi, &res, n).map_err(|e| e.to_string())?;
            let want = -(n as f64 + 1.0);
            ensure((e.slope - want).abs() <= 0.05, || {
                format!("{label}: D^{n} delta slope {} vs {want}", e.slope)
            })?;
        }
    }
    let out = bin().args(["order", "--expr", "delta", "--q", "1", "--out"]).arg(tmp_file("order_delta.csv")).output().unwrap();
    let summary = String::from_utf8_lossy(&out.stdout);
    let slope: f64 = summary
        .trim()
        .strip_prefix("slope=")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("unreadable summary {summary:?}"))?;
    ensure((slope + 1.0).abs() <= 0.01, || format!("cli delta slope {slope}"))?;
    Ok(format!("{}; derivative orders 0..2 within 0.05; cli slope {slope:.4}", notes.join(", ")))
}

fn criterion_3() -> Outcome {
    let f = SmoothPrimitive::TanhScaled(10.0);
    let g = Gf::bar(f.clone()) - Gf::tilde(f);
    let res = Resolution::default();
    let o1 = estimate_order(&g, &bump(), &res, 0).map_err(|e| e.to_string())?;
    let o3 = estimate_order(&g, &phi_q(3), &res, 0).map_err(|e| e.to_string())?;
    ensure(o1.slope >= 1.75, || format!("A1 order {} < 1.75", o1.slope))?;
    ensure(o3.slope >= 3.5, || format!("A3 order {} < 3.5", o3.slope))?;
    Ok(format!("A1 order {:.3} (>= 1.75), A3 order {:.3} (>= 3.5)", o1.slope, o3.slope))
}

fn criterion_4() -> Outcome {
    let th = Gf::heaviside();
    let sq = th.clone() * th.clone();
    let mut values = Vec::new();
    for (label, phi) in [("A1", bump()), ("A3", phi_q(3))] {
        let k = scale(&phi, 0.1).map_err(|e| e.to_string())?;
        let v = evaluate(&th, &k, 0.0).map_err(|e| e.to_string())?;
        let v2 = evaluate(&sq, &k, 0.0).map_err(|e| e.to_string())?;
        ensure((v - 0.5).abs() <= 1e-6, || format!("{label}: theta_bar(0) = {v}"))?;
        ensure((v2 - 0.25).abs() <= 1e-6, || format!("{label}: theta_bar^2(0) = {v2}"))?;
        values.push(format!("{label} {v:.12}/{v2:.12}"));
    }
    let report = classify(&(sq - th), &standard_bases(3).unwrap(), &ClassifyOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(report.verdict != Verdict::Null, || "theta_bar^2 - theta_bar classified null".into())?;
    Ok(format!("values {}; verdict {}", values.join(", "), report.verdict))
}

fn criterion_5() -> Outcome {
    let ys = grid(-1.0, 1.0, 401);
    let mut worst = 0.0f64;
    for phi in [bump(), phi_q(3), translate(&phi_q(2), 0.2).unwrap()] {
        for eps in [0.2, 0.1, 0.01] {
            let k = scale(&phi, eps).map_err(|e| e.to_string())?;
            let d = evaluate_grid(&Gf::heaviside(), &k, &ys, 1).map_err(|e| e.to_string())?;
            let delta = evaluate_grid(&Gf::delta(), &k, &ys, 0).map_err(|e| e.to_string())?;
            for (a, b) in d.iter().zip(&delta) {
                worst = worst.max((a - b).abs());
            }
            // Independent check of the structural rule at one scale.
            if eps == 0.2 {
                for &y in &[-0.15, 0.0, 0.05] {
                    let h = 1e-4;
                    let fd = (evaluate(&Gf::heaviside(), &k, y + h).unwrap()
                        - evaluate(&Gf::heaviside(), &k, y - h).unwrap())
                        / (2.0 * h);
                    let exact = Kernel::value(&k, -y);
                    ensure((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), || {
                        format!("difference quotient {fd} vs {exact} at y={y}")
                    })?;
                }
            }
        }
    }
    ensure(worst <= 1e-8, || format!("sup |D theta_bar - delta| = {worst:e}"))?;
    Ok(format!("sup |D theta_bar - delta_bar| = {worst:.1e} over 3 bases x 3 scales"))
}

fn criterion_6() -> Outcome {
    let ys = grid(-1.0, 1.0, 401);
    for (phi, b) in [(bump(), 1.0), (translate(&phi_q(3), 0.5).unwrap(), 1.5)] {
        for frac in [0.999, 0.5, 0.1, 0.01] {
            let eps = frac / b;
            let k = scale(&phi, eps).map_err(|e| e.to_string())?;
            let vals = evaluate_grid(&Gf::null_example(), &k, &ys, 0).map_err(|e| e.to_string())?;
            ensure(vals.iter().all(|v| *v == 0.0), || format!("nonzero null example at eps={eps}"))?;
        }
    }
    let bases = standard_bases(3).unwrap();
    let opts = ClassifyOptions::default();
    let r1 = classify(&Gf::null_example(), &bases, &opts).map_err(|e| e.to_string())?;
    let r2 = classify(&(Gf::null_example() * Gf::delta()), &bases, &opts).map_err(|e| e.to_string())?;
    ensure(r1.verdict == Verdict::Null, || format!("null example verdict {}", r1.verdict))?;
    ensure(r2.verdict == Verdict::Null, || format!("null example * delta verdict {}", r2.verdict))?;
    Ok("exact zeros for eps < 1/b; null example and its product with delta classified null".into())
}

fn criterion_7() -> Outcome {
    let res = Resolution::default();
    let mut worst = 0.0f64;
    for k in -3..=4 {
        let g = Gf::family(format!("eps^{k}"), move |eps, y, n| {
            let d = [y.cos(), -y.sin(), -y.cos(), y.sin()][n % 4];
            eps.powi(k) * d
        });
        let e = estimate_order(&g, &bump(), &res, 0).map_err(|e| e.to_string())?;
        worst = worst.max((e.slope - k as f64).abs());
    }
    ensure(worst <= 1e-6, || format!("max slope error {worst:e}"))?;
    let z = estimate_order(&Gf::null_example(), &bump(), &res, 0).map_err(|e| e.to_string())?;
    let z2 = estimate_order(&(Gf::null_example() * Gf::delta()), &phi_q(3), &res, 1).map_err(|e| e.to_string())?;
    ensure(z.exact_zero && z2.exact_zero, || "exact-zero short-circuit did not trigger".into())?;
    Ok(format!("k=-3..4 max slope error {worst:.1e}; exact-zero triggered"))
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let func = prop_oneof![
        prop_oneof![Just("tanh10"), Just("sin"), Just("exp"), Just("gauss")].prop_map(|n| FuncRef {
            name: n.into(),
            args: vec![],
            primitive: FunctionRegistry::default().resolve(n, &[]).unwrap(),
        }),
        prop::collection::vec(-50.0f64..50.0, 1..4).prop_map(|c| FuncRef {
            name: "poly".into(),
            args: c.clone(),
            primitive: SmoothPrimitive::Polynomial(c),
        }),
    ];
    let number = prop_oneof![-1e4f64..1e4, Just(-1.0), Just(2.0)];
    let leaf = prop_oneof![
        Just(Expr::Delta),
        Just(Expr::Heaviside),
        Just(Expr::NullEx),
        number.clone().prop_map(Expr::Number),
        func.clone().prop_map(Expr::Bar),
        func.prop_map(Expr::Tilde),
    ];
    leaf.prop_recursive(6, 64, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sum(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Product(Box::new(a), Box::new(b))),
            (number.clone(), inner.clone()).prop_map(|(c, a)| Expr::Scalar(c, Box::new(a))),
            (0u32..4, inner).prop_map(|(n, a)| Expr::Derivative(n, Box::new(a))),
        ]
    })
}

fn criterion_8() -> Outcome {
    let reg = FunctionRegistry::default();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&expr_strategy(), |e| {
            let text = e.to_string();
            prop_assert_eq!(parse(&text, &reg), Ok(e.clone()), "{}", text);
            let dag = to_dag(&e);
            prop_assert_eq!(parse(&dag.to_string(), &reg).map(|x| to_dag(&x)), Ok(dag));
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let p = |s: &str| parse(s, &reg).map_err(|e| format!("{s}: {e}"));
    let tanh = FuncRef {
        name: "tanh10".into(),
        args: vec![],
        primitive: SmoothPrimitive::TanhScaled(10.0),
    };
    ensure(p("delta*delta")? == Expr::Product(Box::new(Expr::Delta), Box::new(Expr::Delta)), || {
        "delta*delta shape".into()
    })?;
    ensure(
        p("bar(tanh10) - tilde(tanh10)")?
            == Expr::Sum(
                Box::new(Expr::Bar(tanh.clone())),
                Box::new(Expr::Scalar(-1.0, Box::new(Expr::Tilde(tanh)))),
            ),
        || "difference shape".into(),
    )?;
    ensure(p("D(heaviside)")? == Expr::Derivative(1, Box::new(Expr::Heaviside)), || {
        "derivative shape".into()
    })?;
    let e = parse("heaviside + bar(tanhh10)", &reg).err().ok_or("unknown name accepted")?;
    ensure(e.offset == 16 && e.message.contains("tanhh10"), || format!("diagnostic {e:?}"))?;
    let e = parse("deltta", &reg).err().ok_or("unknown atom accepted")?;
    ensure(e.offset == 0, || format!("diagnostic {e:?}"))?;
    let out = bin()
        .args(["eval", "--expr", "delta + sni", "--q", "1", "--eps", "0.1", "--out"])
        .arg(tmp_file("never.csv"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(2) && stderr.contains("byte 8"), || format!("cli diagnostic {stderr:?}"))?;
    Ok("1000 round trips; grammar shapes; diagnostics at byte offsets".into())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = bin().args(["figures", "--outdir"]).arg(dir.path()).status().unwrap();
    ensure(status.success(), || format!("figures exited with {status}"))?;
    for name in ["fig1_phi1.csv", "fig1_phi3.csv", "fig2_heaviside.csv", "fig3_smoothed.csv", "fig3_error.csv"] {
        ensure(dir.path().join(name).is_file(), || format!("missing {name}"))?;
    }
    let phi3 = read_csv(&dir.path().join("fig1_phi3.csv"));
    let (x, phi) = (column(&phi3, "x"), column(&phi3, "phi"));
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let area: f64 = x.windows(2).zip(phi.windows(2)).map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1])).sum();
    ensure(min < 0.0, || "fig1_phi3 has no negative values".into())?;
    ensure((area - 1.0).abs() <= 1e-3, || format!("fig1_phi3 integrates to {area}"))?;

    let fig2 = read_csv(&dir.path().join("fig2_heaviside.csv"));
    ensure(column(&fig2, "thetabar").windows(2).all(|w| w[1] >= w[0]), || {
        "thetabar not nondecreasing".into()
    })?;

    let err = read_csv(&dir.path().join("fig3_error.csv"));
    let maxabs = |c: &str| column(&err, c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = maxabs("q3_eps0.02") / maxabs("q3_eps0.01");
    ensure(ratio >= 16.0 * 0.7, || format!("q=3 error contraction {ratio} < 11.2"))?;
    Ok(format!("5 files; phi3 min {min:.3}, area {area:.6}; q=3 error contraction {ratio:.2}"))
}

fn tmp_file(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("colombeau-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("mollifier construction", criterion_1),
        ("reflection and moderation", criterion_2),
        ("embedding equivalence", criterion_3),
        ("non-equivalence of powers", criterion_4),
        ("derivative identity", criterion_5),
        ("null example and ideal property", criterion_6),
        ("estimator calibration", criterion_7),
        ("parser", criterion_8),
        ("figure reproduction", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}) [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}) [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    let _ = std::fs::remove_dir_all(tmp_file("x").parent().unwrap());
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
