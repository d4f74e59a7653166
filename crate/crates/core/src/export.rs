//! CSV tables for each figure panel.
//!
//! Columns carry SI units in their names. Numbers are written with Rust's
//! shortest round-trip formatting, so parsing a file back gives the exact
//! values that were written.

use crate::analysis::{FidelityReport, ParityFit, ProbTable};
use crate::error::{Error, Result};
use crate::experiment::{ParityCurve, Populations, RabiCurve, TruthTable};
use crate::noise::{dephasing_factor, max_fidelity_from_dephasing, ErrorBudget};
use crate::params::PhysicalParams;
use crate::thermal::{double_excitation_prob, BlockadeModel, Histogram};

const LABELS: [&str; 4] = ["00", "01", "10", "11"];

fn write_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn budget_csv(budget: &ErrorBudget) -> Result<String> {
    let mut rows: Vec<Vec<String>> =
        budget.contributions.named().iter().map(|(name, p)| vec![name.to_string(), num(*p)]).collect();
    rows.push(vec!["total_quadrature".into(), num(budget.total)]);
    write_table(&["source", "two_qubit_error_probability"], rows)
}

/// Dephasing factor and the fidelity ceiling it implies, per temperature.
pub fn dephasing_csv(params: &PhysicalParams, temperatures: &[f64]) -> Result<String> {
    let rows = temperatures.iter().map(|&t| {
        let d = dephasing_factor(t, params.t24, params);
        vec![num(t), num(params.t24), num(d), num(max_fidelity_from_dephasing(d))]
    });
    write_table(&["temperature_K", "t24_s", "dephasing_factor", "max_fidelity"], rows)
}

pub fn blockade_profile_csv(model: &BlockadeModel, omega: f64, separations: &[f64]) -> Result<String> {
    let rows = separations
        .iter()
        .map(|&r| {
            let b = model.blockade(r);
            Ok(vec![num(r), num(b), num(double_excitation_prob(omega, b)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    write_table(&["separation_m", "blockade_rad_per_s", "double_excitation_prob"], rows)
}

/// Two columns, bin centre and probability density, with the binned
/// variable multiplied by `scale` (1e6 writes metres as micrometres).
pub fn histogram_csv(h: &Histogram, value_column: &str, scale: f64) -> Result<String> {
    let density = format!("density_per_{}", value_column.rsplit('_').next().unwrap_or("unit"));
    let rows = h.centers().zip(h.densities()).map(|(c, d)| vec![num(c * scale), num(d / scale)]);
    write_table(&[value_column, &density], rows)
}

pub fn rabi_csv(curve: &RabiCurve, retention: f64) -> Result<String> {
    let site = curve.corrected_site(retention);
    let neighbor = curve.corrected_neighbor(retention);
    let rows = curve.points.iter().enumerate().map(|(i, p)| {
        vec![
            num(p.duration),
            num(p.site),
            num(p.site_stderr),
            num(p.neighbor),
            num(p.neighbor_stderr),
            num(site[i]),
            num(neighbor[i]),
        ]
    });
    write_table(
        &[
            "duration_s",
            "site_raw",
            "site_stderr",
            "neighbor_raw",
            "neighbor_stderr",
            "site_corrected",
            "neighbor_corrected",
        ],
        rows,
    )
}

/// Truth table with every probability divided by `retention` (1 for raw).
pub fn truth_table_csv(table: &TruthTable, retention: f64) -> Result<String> {
    let scaled = |m: &ProbTable, i: usize, j: usize| num(m[i][j] / retention);
    let rows = (0..4).map(|i| {
        let mut row = vec![LABELS[i].to_string()];
        row.extend((0..4).map(|j| scaled(&table.probs, i, j)));
        row.extend((0..4).map(|j| scaled(&table.stderr, i, j)));
        row.push(num(table.loss[i]));
        row.push(table.shots.to_string());
        row
    });
    write_table(
        &[
            "input",
            "p_out_00",
            "p_out_01",
            "p_out_10",
            "p_out_11",
            "stderr_00",
            "stderr_01",
            "stderr_10",
            "stderr_11",
            "raw_loss",
            "shots_per_setting",
        ],
        rows,
    )
}

pub fn populations_csv(rows: &[(&str, &Populations)]) -> Result<String> {
    let rows = rows.iter().map(|(label, p)| {
        let mut row = vec![label.to_string()];
        row.extend(p.p.iter().map(|&x| num(x)));
        row.extend(p.stderr.iter().map(|&x| num(x)));
        row.push(num(p.loss));
        row.push(p.shots.to_string());
        row
    });
    write_table(
        &[
            "state",
            "p00",
            "p01",
            "p10",
            "p11",
            "stderr_00",
            "stderr_01",
            "stderr_10",
            "stderr_11",
            "loss",
            "shots_per_setting",
        ],
        rows,
    )
}

pub fn parity_csv(curve: &ParityCurve, fit: Option<&ParityFit>) -> Result<String> {
    let rows = curve.points.iter().map(|pt| {
        let model =
            fit.map_or(f64::NAN, |f| 2.0 * f.re_c2 - 2.0 * f.abs_c1 * (2.0 * f.omega_fit * pt.gap + f.xi).cos());
        let mut row = vec![num(pt.gap), num(pt.parity), num(pt.stderr)];
        row.extend(pt.populations.p.iter().map(|&x| num(x)));
        row.push(num(model));
        row
    });
    write_table(&["gap_s", "parity", "stderr", "p00", "p01", "p10", "p11", "fit"], rows)
}

/// Fit parameters and fidelities, one quantity per row.
pub fn parity_fit_csv(fit: &ParityFit, report: &FidelityReport) -> Result<String> {
    let se = fit.std_errors();
    let rows = [
        ("re_c2", fit.re_c2, se[0], "1"),
        ("abs_c1", fit.abs_c1, se[1], "1"),
        ("xi_mod_2pi", fit.xi, se[2], "rad"),
        ("omega_fit", fit.omega_fit, se[3], "rad_per_s"),
        ("residual_rms", fit.residual_rms, f64::NAN, "1"),
        ("chi2", fit.chi2, f64::NAN, "1"),
        ("p00", report.p00, f64::NAN, "1"),
        ("p11", report.p11, f64::NAN, "1"),
        ("fidelity_raw", report.raw, f64::NAN, "1"),
        ("pair_retention", report.pair_retention, f64::NAN, "1"),
        ("fidelity_background_corrected", report.background_corrected, f64::NAN, "1"),
        ("trace_retention", report.trace_retention, f64::NAN, "1"),
        ("fidelity_trace_corrected", report.trace_corrected, f64::NAN, "1"),
    ]
    .map(|(name, v, e, unit)| vec![name.to_string(), num(v), num(e), unit.to_string()]);
    write_table(&["quantity", "value", "std_error", "unit"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{quadrature_budget, ErrorContributions};

    fn parse(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
        (header, rows)
    }

    #[test]
    fn budget_table() {
        let text = budget_csv(&quadrature_budget(ErrorContributions::CURRENT).unwrap()).unwrap();
        let (header, rows) = parse(&text);
        assert_eq!(header, ["source", "two_qubit_error_probability"]);
        assert_eq!(rows.len(), 6);
        let values: Vec<f64> = rows[..5].iter().map(|r| r[1].parse().unwrap()).collect();
        let total: f64 = rows[5][1].parse().unwrap();
        assert_eq!(crate::noise::quadrature_sum(values), total);
    }

    #[test]
    fn derived_columns_recompute_exactly() {
        let p = PhysicalParams::default();
        let temps: Vec<f64> = (0..=25).map(|i| 10e-6 * i as f64).collect();
        let (_, rows) = parse(&dephasing_csv(&p, &temps).unwrap());
        for r in rows {
            let d: f64 = r[2].parse().unwrap();
            let f: f64 = r[3].parse().unwrap();
            assert_eq!(max_fidelity_from_dephasing(d), f);
        }
        let m = BlockadeModel { b0: 1.7e9, r0: 8.7e-6 };
        let seps: Vec<f64> = (0..20).map(|i| 8e-6 + 0.5e-6 * i as f64).collect();
        let (_, rows) = parse(&blockade_profile_csv(&m, p.omega_ryd, &seps).unwrap());
        for r in rows {
            let b: f64 = r[1].parse().unwrap();
            assert_eq!(double_excitation_prob(p.omega_ryd, b).unwrap(), r[2].parse::<f64>().unwrap());
            assert_eq!(m.blockade(r[0].parse().unwrap()), b);
        }
    }

    #[test]
    fn histogram_columns() {
        let mut h = Histogram::new(0.25e-6);
        for x in [0.1e-6, 0.3e-6, 0.35e-6, 1.1e-6] {
            h.push(x);
        }
        let (header, rows) = parse(&histogram_csv(&h, "abs_dz_um", 1e6).unwrap());
        assert_eq!(header, ["abs_dz_um", "density_per_um"]);
        assert_eq!(rows.len(), 5);
        assert!((rows[0][0].parse::<f64>().unwrap() - 0.125).abs() < 1e-12);
        let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap() * 0.25).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
