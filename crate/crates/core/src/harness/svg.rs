use super::{HarnessError, TrialResult};
use crate::semantics::ClassLabel;
use crate::simworld::WorldModel;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Pixels per metre in the rendering.
const SCALE: f64 = 10.0;

fn color(class: ClassLabel) -> &'static str {
    match class {
        ClassLabel::Roof => "#c0392b",
        ClassLabel::PavedArea => "#95a5a6",
        ClassLabel::Grass => "#7dce82",
        ClassLabel::Vegetation => "#2e8b57",
        ClassLabel::Fence => "#8e5a2b",
        ClassLabel::Car => "#2c3e80",
        ClassLabel::Tree => "#1e5631",
        ClassLabel::Unknown => "#000000",
    }
}

/// SVG text for a trial drawn over its world: regions, the trajectory
/// polyline (one vertex per control step, so vertical motion shows as dense
/// vertices), the descent point and the target.
pub fn trajectory_svg(trial: &TrialResult, world: &WorldModel) -> Result<String, HarnessError> {
    if trial.trajectory.is_empty() {
        return Err(HarnessError::EmptyTrajectory);
    }
    let b = world.bounds;
    let (w, h) = (b.width() * SCALE, b.height() * SCALE);
    let tx = |x: f64| (x - b.min.x) * SCALE;
    let ty = |y: f64| (y - b.min.y) * SCALE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="{}"/>"#, color(ClassLabel::Grass));
    for r in &world.regions {
        let _ = writeln!(
            s,
            r#"<rect class="{:?}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
            r.class,
            tx(r.rect.min.x),
            ty(r.rect.min.y),
            r.rect.width() * SCALE,
            r.rect.height() * SCALE,
            color(r.class)
        );
    }
    let d = &world.door;
    let half = d.normal.rotate_quarter(1) * (d.width / 2.0);
    let (a, c) = (d.center - half, d.center + half);
    let _ = writeln!(
        s,
        r##"<line class="door" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#f1c40f" stroke-width="4"/>"##,
        tx(a.x),
        ty(a.y),
        tx(c.x),
        ty(c.y)
    );
    let pts: Vec<String> = trial
        .trajectory
        .iter()
        .map(|p| format!("{:.3},{:.3}", tx(p.pose.x), ty(p.pose.y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#8e44ad" stroke-width="2"/>"##,
        pts.join(" ")
    );
    for p in &trial.trajectory {
        let _ = writeln!(
            s,
            r##"<circle class="sample" cx="{:.3}" cy="{:.3}" r="0.8" fill="#8e44ad"/>"##,
            tx(p.pose.x),
            ty(p.pose.y)
        );
    }
    if let Some(dp) = trial.descent_point {
        let _ = writeln!(
            s,
            r##"<circle class="descent" cx="{:.3}" cy="{:.3}" r="5" fill="none" stroke="#ffffff" stroke-width="2"/>"##,
            tx(dp.x),
            ty(dp.y)
        );
    }
    let goal = trial.approach_point.or(trial.descent_point).unwrap_or(d.center);
    let _ = writeln!(s, r##"<polygon class="target" points="{}" fill="#f39c12"/>"##, star(tx(goal.x), ty(goal.y), 9.0));
    s.push_str("</svg>\n");
    Ok(s)
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let rad = if k % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * k as f64 / 5.0 - std::f64::consts::FRAC_PI_2;
            format!("{:.3},{:.3}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Write the rendering to `path`; nothing is written for an empty trajectory.
pub fn emit_trajectory_svg(trial: &TrialResult, world: &WorldModel, path: &Path) -> Result<(), HarnessError> {
    let text = trajectory_svg(trial, world)?;
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
