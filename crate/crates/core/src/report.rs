//! Byte-stable serialization of computed results.
//!
//! JSON documents are hand-assembled with keys in byte order and every
//! finite float rendered with 17 significant digits, so identical inputs
//! always produce identical bytes and every value round-trips exactly.
//! Non-finite values, including the infinite dual exponent at p = 1,
//! appear as the strings "inf", "-inf" and "NaN". CSV tables quote only
//! where needed and use the same float rendering.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::functionals::ConstantsReport;
use crate::scalar::Real;
use crate::verify::{ConvergenceStudy, VerificationResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// What to serialize. Borrowed so callers keep ownership of their results.
pub enum ReportPayload<'a, T> {
    Constants(&'a ConstantsReport<T>),
    Results(&'a [VerificationResult<T>]),
    Study(&'a ConvergenceStudy<T>),
}

/// Renders the payload to a string in the requested format.
pub fn render_report<T: Real>(payload: &ReportPayload<'_, T>, format: ReportFormat) -> String {
    match (payload, format) {
        (ReportPayload::Constants(rep), ReportFormat::Json) => constants_report_json(rep),
        (ReportPayload::Constants(rep), ReportFormat::Csv) => constants_report_csv(rep),
        (ReportPayload::Results(rs), ReportFormat::Json) => verification_results_json(rs),
        (ReportPayload::Results(rs), ReportFormat::Csv) => verification_results_csv(rs),
        (ReportPayload::Study(study), ReportFormat::Json) => convergence_json(study),
        (ReportPayload::Study(study), ReportFormat::Csv) => convergence_csv(study),
    }
}

/// Renders and writes the payload; I/O failures carry the path.
pub fn emit_report<T: Real>(
    payload: &ReportPayload<'_, T>,
    format: ReportFormat,
    path: &Path,
) -> Result<()> {
    let content = render_report(payload, format);
    std::fs::write(path, content).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn json_real<T: Real>(x: T) -> String {
    let v = x.as_f64();
    if v.is_nan() {
        "\"NaN\"".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "\"inf\"" } else { "\"-inf\"" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn json_opt_real<T: Real>(x: Option<T>) -> String {
    match x {
        Some(v) => json_real(v),
        None => "null".to_string(),
    }
}

fn csv_real<T: Real>(x: T) -> String {
    let v = x.as_f64();
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// One constants bundle as a JSON object, keys in byte order.
pub fn constants_report_json<T: Real>(rep: &ConstantsReport<T>) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"Q_q\": {},", json_real(rep.qq));
    let _ = writeln!(
        s,
        "  \"Q_q_ball_r_omega\": {},",
        json_real(rep.qq_ball_r_omega)
    );
    let _ = writeln!(
        s,
        "  \"Q_q_dual_route\": {},",
        json_opt_real(rep.qq_dual_route)
    );
    let _ = writeln!(
        s,
        "  \"Q_q_pairing_route\": {},",
        json_real(rep.qq_pairing_route)
    );
    let _ = writeln!(s, "  \"domain\": {},", json_string(&rep.domain));
    let _ = writeln!(
        s,
        "  \"estimated_error\": {},",
        json_real(rep.estimated_error)
    );
    let _ = writeln!(
        s,
        "  \"lambda_Ap_bracket\": {{\"lower\": {}, \"upper\": {}}},",
        json_real(rep.lambda_ap_bracket.0),
        json_real(rep.lambda_ap_bracket.1)
    );
    let _ = writeln!(s, "  \"lambda_B2\": {},", json_real(rep.lambda_b2));
    let _ = writeln!(s, "  \"lambda_Bp\": {},", json_real(rep.lambda_bp));
    let _ = writeln!(s, "  \"mesh_h\": {},", json_real(rep.mesh_h));
    s.push_str("  \"metadata\": {\n");
    let _ = writeln!(
        s,
        "    \"bp_iterations\": {},",
        rep.metadata.bp_iterations
    );
    let _ = writeln!(
        s,
        "    \"bp_pairing_check\": {},",
        json_real(rep.metadata.bp_pairing_check)
    );
    let _ = writeln!(
        s,
        "    \"residual_samples\": {},",
        rep.metadata.residual_samples
    );
    let _ = writeln!(s, "    \"residual_seed\": {},", rep.metadata.residual_seed);
    let _ = writeln!(
        s,
        "    \"torsion_iterations\": {},",
        rep.metadata.torsion_iterations
    );
    let _ = writeln!(
        s,
        "    \"torsion_residual\": {}",
        json_opt_real(rep.metadata.torsion_residual)
    );
    s.push_str("  },\n");
    let _ = writeln!(s, "  \"p\": {},", json_real(rep.p));
    let _ = writeln!(s, "  \"q\": {},", json_real(rep.q));
    let _ = writeln!(s, "  \"r_omega\": {},", json_real(rep.r_omega));
    let _ = writeln!(s, "  \"rho\": {},", json_real(rep.rho));
    let _ = writeln!(s, "  \"sqrt_rho\": {}", json_real(rep.sqrt_rho));
    s.push_str("}\n");
    s
}

/// The same bundle as a two-column key,value table in the JSON key order.
pub fn constants_report_csv<T: Real>(rep: &ConstantsReport<T>) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("Q_q", csv_real(rep.qq)),
        ("Q_q_ball_r_omega", csv_real(rep.qq_ball_r_omega)),
        (
            "Q_q_dual_route",
            rep.qq_dual_route.map(csv_real).unwrap_or_default(),
        ),
        ("Q_q_pairing_route", csv_real(rep.qq_pairing_route)),
        ("domain", rep.domain.clone()),
        ("estimated_error", csv_real(rep.estimated_error)),
        ("lambda_Ap_lower", csv_real(rep.lambda_ap_bracket.0)),
        ("lambda_Ap_upper", csv_real(rep.lambda_ap_bracket.1)),
        ("lambda_B2", csv_real(rep.lambda_b2)),
        ("lambda_Bp", csv_real(rep.lambda_bp)),
        ("mesh_h", csv_real(rep.mesh_h)),
        (
            "metadata_bp_iterations",
            rep.metadata.bp_iterations.to_string(),
        ),
        (
            "metadata_bp_pairing_check",
            csv_real(rep.metadata.bp_pairing_check),
        ),
        (
            "metadata_residual_samples",
            rep.metadata.residual_samples.to_string(),
        ),
        (
            "metadata_residual_seed",
            rep.metadata.residual_seed.to_string(),
        ),
        (
            "metadata_torsion_iterations",
            rep.metadata.torsion_iterations.to_string(),
        ),
        (
            "metadata_torsion_residual",
            rep.metadata
                .torsion_residual
                .map(csv_real)
                .unwrap_or_default(),
        ),
        ("p", csv_real(rep.p)),
        ("q", csv_real(rep.q)),
        ("r_omega", csv_real(rep.r_omega)),
        ("rho", csv_real(rep.rho)),
        ("sqrt_rho", csv_real(rep.sqrt_rho)),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["key", "value"]);
    for (k, v) in rows {
        let _ = w.write_record([k, v.as_str()]);
    }
    finish_csv(w)
}

/// Adjudicated checks as a JSON array, element keys in byte order.
pub fn verification_results_json<T: Real>(results: &[VerificationResult<T>]) -> String {
    let mut s = String::new();
    s.push_str("[\n");
    for (i, r) in results.iter().enumerate() {
        s.push_str("  {\n");
        let _ = writeln!(s, "    \"id\": {},", json_string(r.id.as_str()));
        let _ = writeln!(s, "    \"lhs\": {},", json_real(r.lhs));
        let _ = writeln!(s, "    \"margin\": {},", json_real(r.margin));
        let _ = writeln!(
            s,
            "    \"note\": {},",
            match &r.note {
                Some(n) => json_string(n),
                None => "null".to_string(),
            }
        );
        let _ = writeln!(s, "    \"p\": {},", json_real(r.p));
        let _ = writeln!(s, "    \"rhs\": {},", json_real(r.rhs));
        let _ = writeln!(s, "    \"tolerance\": {},", json_real(r.tolerance));
        let _ = writeln!(s, "    \"verdict\": {}", json_string(r.verdict.as_str()));
        s.push_str(if i + 1 == results.len() { "  }\n" } else { "  },\n" });
    }
    s.push_str("]\n");
    s
}

/// Adjudicated checks as CSV; an empty input yields the header row only.
pub fn verification_results_csv<T: Real>(results: &[VerificationResult<T>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "id",
        "p",
        "lhs",
        "rhs",
        "margin",
        "tolerance",
        "verdict",
        "note",
    ]);
    for r in results {
        let _ = w.write_record([
            r.id.as_str().to_string(),
            csv_real(r.p),
            csv_real(r.lhs),
            csv_real(r.rhs),
            csv_real(r.margin),
            csv_real(r.tolerance),
            r.verdict.as_str().to_string(),
            r.note.clone().unwrap_or_default(),
        ]);
    }
    finish_csv(w)
}

/// Refinement study as CSV. Differences and observed orders of the torsion
/// column are aligned with the finer of the rows they compare, so the first
/// row has no delta and the first two no order.
pub fn convergence_csv<T: Real>(study: &ConvergenceStudy<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "h",
        "Q_q",
        "Q_q_delta",
        "Q_q_order",
        "sqrt_rho",
        "lambda_B2",
        "flag",
    ]);
    let opt = |x: Option<T>| x.map(csv_real).unwrap_or_default();
    for (k, row) in study.rows.iter().enumerate() {
        let delta = if k >= 1 {
            opt(study.qq_deltas.get(k - 1).copied().flatten())
        } else {
            String::new()
        };
        let order = if k >= 2 {
            opt(study.qq_orders.get(k - 2).copied().flatten())
        } else {
            String::new()
        };
        let _ = w.write_record([
            csv_real(row.h),
            opt(row.qq),
            delta,
            order,
            opt(row.sqrt_rho),
            opt(row.lambda_b2),
            row.flag.clone(),
        ]);
    }
    finish_csv(w)
}

/// Refinement study as JSON, keys in byte order, derived columns included.
pub fn convergence_json<T: Real>(study: &ConvergenceStudy<T>) -> String {
    let opt_list = |xs: &[Option<T>]| {
        let items: Vec<String> = xs.iter().map(|x| json_opt_real(*x)).collect();
        format!("[{}]", items.join(", "))
    };
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"Q_q_deltas\": {},", opt_list(&study.qq_deltas));
    let _ = writeln!(s, "  \"Q_q_orders\": {},", opt_list(&study.qq_orders));
    let _ = writeln!(s, "  \"domain\": {},", json_string(&study.domain));
    let _ = writeln!(s, "  \"p\": {},", json_real(study.p));
    s.push_str("  \"rows\": [\n");
    for (i, row) in study.rows.iter().enumerate() {
        s.push_str("    {");
        let _ = write!(
            s,
            "\"Q_q\": {}, \"flag\": {}, \"h\": {}, \"lambda_B2\": {}, \"sqrt_rho\": {}",
            json_opt_real(row.qq),
            json_string(&row.flag),
            json_real(row.h),
            json_opt_real(row.lambda_b2),
            json_opt_real(row.sqrt_rho),
        );
        s.push_str(if i + 1 == study.rows.len() { "}\n" } else { "},\n" });
    }
    s.push_str("  ]\n");
    s.push_str("}\n");
    s
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("csv writer flush cannot fail on Vec");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::SolverMetadata;
    use crate::verify::{CheckId, Verdict};

    fn sample_report() -> ConstantsReport<f64> {
        ConstantsReport {
            domain: "disk(c=(0,0),r=1)".to_string(),
            p: 1.0,
            q: f64::INFINITY,
            qq: 2.0943951023931953,
            qq_dual_route: None,
            qq_pairing_route: 2.0943951023931948,
            rho: 1.5707963267948966,
            sqrt_rho: 1.2533141373155003,
            lambda_b2: 1.2533141373155001,
            lambda_bp: 2.0943951023932,
            lambda_ap_bracket: (2.0943951023931953, 2.0943951023932),
            r_omega: 1.0,
            qq_ball_r_omega: 2.0943951023931953,
            mesh_h: 0.05,
            estimated_error: 1.25e-4,
            metadata: SolverMetadata {
                torsion_iterations: 0,
                torsion_residual: None,
                bp_iterations: 12,
                bp_pairing_check: 2.09,
                residual_samples: 50,
                residual_seed: 42,
            },
        }
    }

    fn sample_results() -> Vec<VerificationResult<f64>> {
        vec![
            VerificationResult {
                id: CheckId::Lap,
                p: 1.5,
                lhs: 0.36,
                rhs: 0.3609,
                margin: 0.0009,
                tolerance: 0.0004,
                verdict: Verdict::Holds,
                note: None,
            },
            VerificationResult {
                id: CheckId::TorEquality,
                p: 2.0,
                lhs: f64::NAN,
                rhs: f64::NAN,
                margin: f64::NAN,
                tolerance: f64::NAN,
                verdict: Verdict::Inconclusive,
                note: Some("solver stalled, \"weights\" overflow".to_string()),
            },
        ]
    }

    #[test]
    fn constants_json_contains_every_field() {
        let doc = constants_report_json(&sample_report());
        for key in [
            "\"Q_q\"",
            "\"Q_q_ball_r_omega\"",
            "\"Q_q_dual_route\"",
            "\"Q_q_pairing_route\"",
            "\"domain\"",
            "\"estimated_error\"",
            "\"lambda_Ap_bracket\"",
            "\"lambda_B2\"",
            "\"lambda_Bp\"",
            "\"mesh_h\"",
            "\"metadata\"",
            "\"p\"",
            "\"q\"",
            "\"r_omega\"",
            "\"rho\"",
            "\"sqrt_rho\"",
            "\"torsion_iterations\"",
            "\"torsion_residual\"",
            "\"bp_iterations\"",
            "\"bp_pairing_check\"",
            "\"residual_samples\"",
            "\"residual_seed\"",
        ] {
            assert!(doc.contains(key), "missing {key} in:\n{doc}");
        }
        // The infinite dual exponent and the absent dual route.
        assert!(doc.contains("\"q\": \"inf\""));
        assert!(doc.contains("\"Q_q_dual_route\": null"));
        // Parses as JSON despite being hand-assembled.
        let parsed: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(parsed["metadata"]["residual_seed"], 42);
    }

    #[test]
    fn float_rendering_round_trips_exactly() {
        for &x in &[
            0.1f64,
            std::f64::consts::PI,
            1.2533141373155003,
            3.5144253737082962e-2,
            -7.25e-300,
        ] {
            let rendered = json_real(x);
            let back: f64 = rendered.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{rendered}");
        }
    }

    #[test]
    fn identical_inputs_produce_identical_bytes() {
        let rep = sample_report();
        let payload = ReportPayload::Constants(&rep);
        let a = render_report(&payload, ReportFormat::Json);
        let b = render_report(&payload, ReportFormat::Json);
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("r1.json");
        let p2 = dir.path().join("r2.json");
        emit_report(&payload, ReportFormat::Json, &p1).unwrap();
        emit_report(&payload, ReportFormat::Json, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn empty_results_csv_is_just_the_header() {
        let csv = verification_results_csv::<f64>(&[]);
        assert_eq!(csv, "id,p,lhs,rhs,margin,tolerance,verdict,note\n");
    }

    #[test]
    fn results_serialize_with_diagnostics() {
        let results = sample_results();
        let json = verification_results_json(&results);
        assert!(json.contains("\"id\": \"LAP\""));
        assert!(json.contains("\"verdict\": \"holds\""));
        assert!(json.contains("\"lhs\": \"NaN\""));
        assert!(json.contains("solver stalled"));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 2);

        let csv = verification_results_csv(&results);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "id,p,lhs,rhs,margin,tolerance,verdict,note"
        );
        assert!(csv.contains("TOR_EQUALITY"));
        // The note with a comma and quotes must arrive quoted and escaped.
        assert!(csv.contains("\"solver stalled, \"\"weights\"\" overflow\""));
    }

    #[test]
    fn study_tables_align_derived_columns() {
        let study = ConvergenceStudy {
            domain: "unit square".to_string(),
            p: 2.0,
            rows: vec![
                crate::verify::ConvergenceRow {
                    h: 0.1,
                    qq: Some(0.3740),
                    sqrt_rho: Some(0.3747),
                    lambda_b2: Some(0.3741),
                    flag: "ok".to_string(),
                },
                crate::verify::ConvergenceRow {
                    h: 0.05,
                    qq: Some(0.3747),
                    sqrt_rho: Some(0.3749),
                    lambda_b2: Some(0.3748),
                    flag: "ok".to_string(),
                },
                crate::verify::ConvergenceRow {
                    h: 0.025,
                    qq: Some(0.37490),
                    sqrt_rho: Some(0.37493),
                    lambda_b2: Some(0.37491),
                    flag: "ok".to_string(),
                },
            ],
            qq_deltas: vec![Some(7e-4), Some(2e-4)],
            qq_orders: vec![Some(1.8)],
        };
        let csv = convergence_csv(&study);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "h,Q_q,Q_q_delta,Q_q_order,sqrt_rho,lambda_B2,flag");
        // First row: no delta, no order. Second: delta only. Third: both.
        assert!(lines[1].contains(",,,"));
        assert!(lines[2].contains(csv_real(7e-4).as_str()));
        assert!(lines[3].contains(csv_real(1.8_f64).as_str()));

        let json = convergence_json(&study);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["rows"].as_array().unwrap().len(), 3);
    }
}
