//! CSV tables and minimal SVG figures. Every table starts with a `# config_hash=` line.

use std::fmt::Write as _;

use crate::certify::CheckpointTensors;
use crate::flow::FlowTrajectory;
use crate::harmonics::SphereGrid;
use crate::transport::{SampleStatus, TransportAtlas};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-checkpoint flow diagnostics.
pub fn diagnostics_csv(traj: &FlowTrajectory, config_hash: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\n");
    s.push_str("t,volume,r,min_R,max_R,sup_abs_R_minus_r,sup_hess_xi\n");
    for cp in &traj.checkpoints {
        let d = &cp.diagnostics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            cp.t,
            d.volume,
            d.r,
            d.min_r,
            d.max_r,
            d.residual_inf,
            opt(d.sup_hess_xi)
        );
    }
    s
}

/// Per-checkpoint tensor diagnostics used by the certificate.
pub fn tensors_csv(tensors: &[CheckpointTensors], config_hash: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\n");
    s.push_str("t,sup_abs_R_minus_r,sup_hess_xi,sup_M,lambda_dot_proposition,lambda_dot_corollary,lambda_dot_tracefree,max_abs_trace_M\n");
    for p in tensors {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.t,
            p.residual_inf,
            p.sup_hess,
            p.sup_m,
            p.lambda_dot.proposition,
            p.lambda_dot.corollary,
            p.lambda_dot_tracefree,
            p.max_trace_m
        );
    }
    s
}

/// Atlas export: one row per sample.
pub fn atlas_csv(atlas: &TransportAtlas, config_hash: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\n");
    s.push_str("y1,y2,y3,x1,x2,x3,J11,J12,J21,J22,opnorm,status\n");
    for p in &atlas.samples {
        let status = match p.status {
            SampleStatus::Ok => "ok".to_string(),
            SampleStatus::Failed { worst_error, s } => format!("failed(err={worst_error:e};s={s})"),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.y[0], p.y[1], p.y[2], p.x[0], p.x[1], p.x[2], p.j[0][0], p.j[0][1], p.j[1][0], p.j[1][1],
            p.opnorm, status
        );
    }
    s
}

/// Generic CSV from a header and rows of already formatted cells.
pub fn table_csv(header: &[&str], rows: &[Vec<String>], config_hash: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\n{}\n", header.join(","));
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Fixed five-stop colormap from dark blue through green to yellow.
fn color(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * 4.0;
    let i = (x.floor() as usize).min(3);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Equirectangular heatmap of grid values (rows are colatitudes, columns longitudes).
pub fn svg_heatmap(grid: &SphereGrid, values: &[f64], title: &str, config_hash: &str) -> String {
    let (nlat, nlon) = (grid.nlat(), grid.nlon());
    let cell = (720.0 / nlon as f64).max(1.0);
    let (w, h) = (cell * nlon as f64, cell * nlat as f64);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w,
        h + 40.0,
        w,
        h + 40.0
    );
    let _ = writeln!(s, "<!-- config_hash={config_hash} -->");
    let _ = writeln!(
        s,
        r#"<text x="4" y="16" font-family="sans-serif" font-size="13">{} [min {:.4e}, max {:.4e}]</text>"#,
        escape(title),
        lo,
        hi
    );
    for i in 0..nlat {
        for j in 0..nlon {
            let (r, g, b) = color((values[i * nlon + j] - lo) / span);
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({r},{g},{b})"/>"#,
                j as f64 * cell,
                24.0 + i as f64 * cell,
                cell + 0.05,
                cell + 0.05
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Log-scale line plot of several positive series sharing the time axis.
pub fn svg_time_series(t: &[f64], series: &[(&str, Vec<f64>)], title: &str, config_hash: &str) -> String {
    let (w, h, pad) = (720.0, 400.0, 50.0);
    let t0 = t.first().copied().unwrap_or(0.0);
    let t1 = t.last().copied().unwrap_or(1.0).max(t0 + 1e-12);
    let logs: Vec<Vec<Option<f64>>> = series
        .iter()
        .map(|(_, v)| v.iter().map(|x| (*x > 0.0).then(|| x.log10())).collect())
        .collect();
    let all: Vec<f64> = logs.iter().flatten().flatten().copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 0.0) };
    let px = |x: f64| pad + (x - t0) / (t1 - t0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - lo) / (hi - lo) * (h - 2.0 * pad);
    const COLORS: [&str; 4] = ["#1f4e99", "#c0392b", "#1e8449", "#7d3c98"];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<!-- config_hash={config_hash} -->");
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let mut dec = lo;
    while dec <= hi {
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">1e{}</text>"#,
            py(dec) + 3.0,
            dec as i64
        );
        dec += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10">t = {t0:.3} .. {t1:.3}</text>"#,
        w / 2.0 - 40.0,
        h - 15.0
    );
    for (k, ((name, _), ys)) in series.iter().zip(&logs).enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<String> = t
            .iter()
            .zip(ys)
            .filter_map(|(x, y)| y.map(|y| format!("{:.2},{:.2}", px(*x), py(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{c}">{}</text>"#,
            w - pad - 160.0,
            pad + 15.0 + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
