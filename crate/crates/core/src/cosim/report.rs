//! Result rendering: CSV trace, JSON event log, SVG frequency plot.
//!
//! CSV column schema (stable, also documented in the README):
//! `time_s,f_sys_hz,f_gen_<bus>...,load_total_pu,attack_total_pu,shed_total_pu`.
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results produce byte-identical files.

use crate::cosim::ScenarioResult;
use crate::protection::default_bands;

pub fn trace_csv(result: &ScenarioResult) -> String {
    let mut out = String::new();
    out.push_str("time_s,f_sys_hz");
    for bus in &result.gen_buses {
        out.push_str(&format!(",f_gen_{bus}_hz"));
    }
    out.push_str(",load_total_pu,attack_total_pu,shed_total_pu\n");
    for s in &result.samples {
        out.push_str(&format!("{},{}", s.time_s, s.f_sys_hz));
        for f in &s.f_gen_hz {
            out.push_str(&format!(",{f}"));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            s.load_total_pu, s.attack_total_pu, s.shed_total_pu
        ));
    }
    out
}

pub fn events_json(result: &ScenarioResult) -> String {
    let doc = serde_json::json!({
        "scenario": result.scenario_name,
        "outcome": result.outcome,
        "steady_state_dev_hz": result.steady_state_dev_hz,
        "events": result.events,
        "links": {
            "plant_to_controller": link_json(&result.links.plant_to_controller),
            "controller_to_plant": link_json(&result.links.controller_to_plant),
            "plant_to_attacker": link_json(&result.links.plant_to_attacker),
        },
    });
    serde_json::to_string_pretty(&doc).expect("events serialize")
}

fn link_json(s: &crate::netem::ChannelStats) -> serde_json::Value {
    serde_json::json!({
        "sent": s.sent,
        "delivered": s.delivered,
        "dropped": s.dropped,
        "mean_delay_s": s.mean_delay_s,
    })
}

/// System-frequency plot with the three grid-code band pairs drawn as
/// horizontal lines (solid nominal, dashed band edges).
pub fn frequency_svg(result: &ScenarioResult) -> String {
    let w = 900.0;
    let h = 420.0;
    let ml = 60.0;
    let mr = 20.0;
    let mt = 30.0;
    let mb = 45.0;
    let t_max = result
        .samples
        .last()
        .map(|s| s.time_s)
        .unwrap_or(1.0)
        .max(1e-9);
    let f_lo = 56.5;
    let f_hi = 63.0;
    let x = |t: f64| ml + (w - ml - mr) * t / t_max;
    let y = |f: f64| mt + (h - mt - mb) * (f_hi - f) / (f_hi - f_lo);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">{} — system frequency</text>\n",
        ml,
        xml_escape(&result.scenario_name)
    ));

    // the three band pairs from the dwell table (unscaled reference values)
    let bands = default_bands(1.0);
    let mut edges: Vec<f64> = Vec::new();
    for b in &bands {
        edges.push(b.low_hz);
        edges.push(b.high_hz);
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    for e in edges {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#cc4444\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n",
            x(0.0), y(e), x(t_max), y(e)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#cc4444\">{e}</text>\n",
            x(t_max) - 34.0,
            y(e) - 3.0
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#999999\" stroke-width=\"1\"/>\n",
        x(0.0),
        y(result.nominal_hz),
        x(t_max),
        y(result.nominal_hz)
    ));

    let pts: Vec<String> = result
        .samples
        .iter()
        .map(|s| format!("{:.2},{:.2}", x(s.time_s), y(s.f_sys_hz.clamp(f_lo, f_hi))))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\"/>\n",
        pts.join(" ")
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        h - mb
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">t [s]</text>\n",
        w / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"8\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">f [Hz]</text>\n",
        h / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosim::{LinkStats, Outcome, TraceSample};
    use crate::protection::Verdict;

    fn tiny_result() -> ScenarioResult {
        ScenarioResult {
            scenario_name: "t".into(),
            outcome: Outcome::Stable,
            verdict: Verdict::Compliant,
            samples: vec![
                TraceSample {
                    time_s: 0.0,
                    f_sys_hz: 60.0,
                    f_gen_hz: vec![60.0, 60.0],
                    load_total_pu: 1.0,
                    attack_total_pu: 0.0,
                    shed_total_pu: 0.0,
                },
                TraceSample {
                    time_s: 0.1,
                    f_sys_hz: 59.95,
                    f_gen_hz: vec![59.94, 59.96],
                    load_total_pu: 1.2,
                    attack_total_pu: 0.2,
                    shed_total_pu: 0.0,
                },
            ],
            events: vec![],
            links: LinkStats::default(),
            gen_buses: vec![1, 2],
            steady_state_dev_hz: 0.0,
            nominal_hz: 60.0,
            offline_record: None,
        }
    }

    #[test]
    fn csv_schema() {
        let csv = trace_csv(&tiny_result());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_s,f_sys_hz,f_gen_1_hz,f_gen_2_hz,load_total_pu,attack_total_pu,shed_total_pu"
        );
        assert_eq!(lines.next().unwrap(), "0,60,60,60,1,0,0");
        assert!(lines.next().unwrap().starts_with("0.1,59.95,"));
    }

    #[test]
    fn svg_contains_all_band_lines() {
        let svg = frequency_svg(&tiny_result());
        for edge in ["58.8", "60.5", "57.5", "61.5", "57", "62.5"] {
            assert!(
                svg.contains(&format!(">{edge}</text>")),
                "missing band label {edge}"
            );
        }
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn events_json_is_valid() {
        let doc = events_json(&tiny_result());
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["scenario"], "t");
    }
}
