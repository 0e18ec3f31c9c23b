//! SVG trajectory figures.

use std::fmt::Write;

use lifenav_core::agent_sim::ActionParams;
use lifenav_core::datagen::{replay, Episode};
use lifenav_core::grid::{GridCell, Traversable};
use lifenav_core::scene::Scene;

const CELL_PX: f64 = 16.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Obstacles, labeled objects, and one polyline per episode. Exploration
/// paths are solid; paths that began from a recalled memory are dashed.
pub fn render_svg(scene: &Scene, episodes: &[Episode], actions: &ActionParams) -> String {
    let scale = CELL_PX / scene.cell_size();
    let (w, h) = (scene.width() as f64 * CELL_PX, scene.height() as f64 * CELL_PX);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    svg.push_str(
        "<style>.obstacle{fill:#555}.object{fill:#2a9d8f}.label{font:9px sans-serif;fill:#222}\
         .explore{fill:none;stroke:#1d4ed8;stroke-width:2}\
         .recall{fill:none;stroke:#ea580c;stroke-width:2;stroke-dasharray:6 3}\
         .start{fill:#16a34a}.target{fill:none;stroke:#dc2626;stroke-width:2}</style>\n",
    );
    let _ = writeln!(svg, r##"<rect width="{w:.0}" height="{h:.0}" fill="#fafafa"/>"##);
    for row in 0..scene.height() {
        for col in 0..scene.width() {
            if !scene.is_passable(GridCell::new(row, col)) {
                let _ = writeln!(
                    svg,
                    r#"<rect class="obstacle" x="{:.0}" y="{:.0}" width="{CELL_PX:.0}" height="{CELL_PX:.0}"/>"#,
                    col as f64 * CELL_PX,
                    row as f64 * CELL_PX
                );
            }
        }
    }
    for o in scene.objects() {
        let (x, y) = (o.x * scale, o.y * scale);
        let _ = writeln!(svg, r#"<circle class="object" cx="{x:.2}" cy="{y:.2}" r="4"/>"#);
        let _ = writeln!(svg, r#"<text class="label" x="{:.2}" y="{:.2}">{}</text>"#, x + 5.0, y - 5.0, escape(&o.category));
    }
    for ep in episodes {
        let mut points = vec![ep.start_pose.xy()];
        for pose in replay(scene, &ep.start_pose, &ep.actions, actions) {
            if points.last() != Some(&pose.xy()) {
                points.push(pose.xy());
            }
        }
        let coords: Vec<String> = points.iter().map(|(x, y)| format!("{:.2},{:.2}", x * scale, y * scale)).collect();
        let class = if ep.recalled { "recall" } else { "explore" };
        let subtask = ep.subtask.map_or_else(String::new, |k| format!(r#" data-subtask="{k}""#));
        let _ = writeln!(svg, r#"<polyline class="{class}"{subtask} points="{}"/>"#, coords.join(" "));
        let (sx, sy) = ep.start_pose.xy();
        let _ = writeln!(svg, r#"<circle class="start" cx="{:.2}" cy="{:.2}" r="3"/>"#, sx * scale, sy * scale);
        let _ = writeln!(
            svg,
            r#"<circle class="target" cx="{:.2}" cy="{:.2}" r="7"><title>{}</title></circle>"#,
            ep.target.x * scale,
            ep.target.y * scale,
            escape(&ep.instruction)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
