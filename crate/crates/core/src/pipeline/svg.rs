//! Static gap charts: one SVG per (attribute, metric), groups on the x-axis,
//! the mean gap as a marker, the interval as a whisker and a zero line.
//!
//! Data values are written with the same formatter as the JSON report so the
//! chart can be checked against it; pixel coordinates use two decimals.

use std::fmt::Write as _;

use crate::fairness::{GapResult, HarmDirection, Metric};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

/// Formats a data value exactly as `serde_json` does.
pub fn json_number(x: f64) -> String {
    serde_json::to_string(&x).expect("finite numbers serialize")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn colour(d: HarmDirection) -> &'static str {
    match d {
        HarmDirection::Harmful => "#c0392b",
        HarmDirection::Favorable => "#1e8449",
        HarmDirection::Neutral => "#555555",
    }
}

/// Chart for the results of one attribute and metric, drawn in the order
/// given.
pub fn gap_chart(attribute: &str, metric: Metric, results: &[&GapResult]) -> String {
    let extent = results
        .iter()
        .flat_map(|r| [r.ci_low.abs(), r.ci_high.abs(), r.gap.abs()])
        .fold(0.0f64, f64::max);
    let half_range = if extent > 0.0 { extent * 1.15 } else { 0.05 };
    let plot_h = HEIGHT - TOP - BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let y = |v: f64| TOP + plot_h / 2.0 - v / half_range * plot_h / 2.0;
    let step = plot_w / results.len().max(1) as f64;

    let mut s = String::new();
    let title = match results.first() {
        Some(r) => format!("{attribute} {metric} gap ({}, {})", r.model, r.dataset),
        None => format!("{attribute} {metric} gap"),
    };
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" data-attribute="{}" data-metric="{metric}">"#,
        escape(attribute)
    )
    .unwrap();
    writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(&title)
    )
    .unwrap();
    writeln!(
        s,
        r##"<line class="zero" x1="{LEFT:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#999999" stroke-dasharray="4 3"/>"##,
        y(0.0),
        WIDTH - RIGHT
    )
    .unwrap();
    writeln!(
        s,
        r##"<line class="axis" x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="#333333"/>"##,
        HEIGHT - BOTTOM
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.2}" transform="rotate(-90 18 {:.2})" text-anchor="middle" font-family="sans-serif" font-size="12">gap to median</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();
    for (i, r) in results.iter().enumerate() {
        let x = LEFT + step * (i as f64 + 0.5);
        writeln!(
            s,
            r#"<g class="group" data-group="{}" data-gap="{}" data-ci-low="{}" data-ci-high="{}" data-significant="{}" data-direction="{}">"#,
            escape(&r.group),
            json_number(r.gap),
            json_number(r.ci_low),
            json_number(r.ci_high),
            r.significant,
            serde_json::to_value(r.direction).unwrap().as_str().unwrap()
        )
        .unwrap();
        let c = colour(r.direction);
        writeln!(
            s,
            r#"<line class="ci" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#,
            y(r.ci_low),
            y(r.ci_high)
        )
        .unwrap();
        for v in [r.ci_low, r.ci_high] {
            writeln!(
                s,
                r#"<line class="cap" x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{c}" stroke-width="2"/>"#,
                x - 6.0,
                y(v),
                x + 6.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<circle class="marker" cx="{x:.2}" cy="{:.2}" r="5" fill="{c}"/>"#,
            y(r.gap)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="value" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#,
            x + 8.0,
            y(r.gap) - 6.0,
            json_number(r.gap)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="label" x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            HEIGHT - BOTTOM + 22.0,
            escape(&r.group)
        )
        .unwrap();
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(group: &str, gap: f64) -> GapResult {
        GapResult {
            model: "toy".into(),
            dataset: "semeval".into(),
            attribute: "age".into(),
            group: group.into(),
            metric: Metric::NegativeFpr,
            value: gap,
            median: 0.0,
            gap,
            per_prompt_values: vec![gap; 2],
            per_prompt_gaps: vec![gap; 2],
            ci_low: gap - 0.01,
            ci_high: gap + 0.01,
            significant: gap != 0.0,
            direction_harmful: gap > 0.0,
            direction: if gap > 0.0 {
                HarmDirection::Harmful
            } else {
                HarmDirection::Neutral
            },
        }
    }

    #[test]
    fn chart_carries_the_report_numbers() {
        let rs = [result("old", 0.25), result("young", 0.0)];
        let refs: Vec<&GapResult> = rs.iter().collect();
        let svg = gap_chart("age", Metric::NegativeFpr, &refs);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(r#"viewBox="0 0 800 400""#));
        assert!(svg.contains(r#"data-group="old" data-gap="0.25" data-ci-low="0.24" data-ci-high="0.26""#));
        assert!(svg.contains(r#"data-direction="harmful""#));
        assert_eq!(svg.matches("class=\"marker\"").count(), 2);
        assert_eq!(svg, gap_chart("age", Metric::NegativeFpr, &refs));
    }

    #[test]
    fn names_are_escaped() {
        let rs = [result("a<b", 0.0)];
        let svg = gap_chart("x&y", Metric::Accuracy, &[&rs[0]]);
        assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y"));
    }
}
