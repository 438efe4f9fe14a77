use super::RocPoint;
use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Step plot of detection rate against false detections, one polyline per curve.
pub fn roc_svg(curves: &[(String, Vec<RocPoint>)]) -> String {
    let max_fd = curves
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.false_detections))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |fd: f64| LEFT + pw * fd / max_fd;
    let py = |r: f64| TOP + ph * (1.0 - r);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let r = k as f64 / 5.0;
        let y = py(r);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{r:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
        let fd = max_fd * r;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{:.0}</text>"#,
            px(fd),
            TOP + ph + 18.0,
            fd
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">false detections</text>"#,
        LEFT + pw / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {:.1})">detection rate</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (name, pts)) in curves.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let mut sorted: Vec<&RocPoint> = pts.iter().collect();
        sorted.sort_by(|a, b| {
            a.false_detections
                .cmp(&b.false_detections)
                .then(a.detection_rate.total_cmp(&b.detection_rate))
        });
        let mut coords: Vec<String> = Vec::new();
        let mut last_rate: Option<f64> = None;
        for p in sorted {
            let x = px(p.false_detections as f64);
            if let Some(r) = last_rate {
                coords.push(format!("{x:.2},{:.2}", py(r)));
            }
            coords.push(format!("{x:.2},{:.2}", py(p.detection_rate)));
            last_rate = Some(p.detection_rate);
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/>"#,
            LEFT + pw - 150.0,
            LEFT + pw - 125.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            LEFT + pw - 118.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
