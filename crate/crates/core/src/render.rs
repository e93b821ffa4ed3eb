//! Top-down SVG drawing of a design.

use std::fmt::Write as _;

use crate::geometry::{self, GeometryError, Rect};
use crate::model::{DesignBundle, LinkRouting, Point};

/// Pixels per millimeter.
pub const SCALE: f64 = 10.0;
/// Blank border around the interposer, in millimeters.
const MARGIN_MM: f64 = 2.0;

/// Renders chiplets (with names), PHYs, interposer routers, links and the
/// interposer outline. Links follow the packaging's routing rule. Output is
/// a pure function of the bundle.
pub fn render_svg(bundle: &DesignBundle) -> Result<String, GeometryError> {
    let mut bounds = geometry::bounding_box(&bundle.placement, &bundle.chiplets)?;
    for r in &bundle.placement.interposer_routers {
        bounds = bounds.union(&Rect { min: r.position, max: r.position });
    }
    let width = (bounds.width() + 2.0 * MARGIN_MM) * SCALE;
    let height = (bounds.height() + 2.0 * MARGIN_MM) * SCALE;
    // screen coordinates: x to the right, y down, origin at the top left
    let px = |p: Point| ((p.x - bounds.min.x + MARGIN_MM) * SCALE, (bounds.max.y - p.y + MARGIN_MM) * SCALE);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(
        s,
        "<!-- {SCALE} px per mm; design origin at the lower left, y axis flipped for screen coordinates -->"
    );
    let (x0, y0) = px(Point::new(bounds.min.x, bounds.max.y));
    let _ = writeln!(
        s,
        r##"<rect class="interposer" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#f4f1e8" stroke="#888" stroke-dasharray="4 2"/>"##,
        bounds.width() * SCALE,
        bounds.height() * SCALE
    );

    for (i, inst) in bundle.placement.chiplets.iter().enumerate() {
        let def = bundle
            .chiplets
            .get(&inst.chiplet)
            .ok_or_else(|| GeometryError::UnknownChiplet(inst.chiplet.clone()))?;
        let r = geometry::footprint(def, inst);
        let (x, y) = px(Point::new(r.min.x, r.max.y));
        let _ = writeln!(
            s,
            r##"<rect class="chiplet" data-index="{i}" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="#244a73"/>"##,
            r.width() * SCALE,
            r.height() * SCALE
        );
        let (cx, cy) = px(Point::new((r.min.x + r.max.x) / 2.0, (r.min.y + r.max.y) / 2.0));
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-size="{:.1}" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
            (r.width().min(r.height()) * SCALE / 6.0).clamp(6.0, 14.0),
            escape(&inst.chiplet)
        );
    }

    for (li, link) in bundle.topology.links.iter().enumerate() {
        let a = geometry::endpoint_position(bundle, &link.a)?;
        let b = geometry::endpoint_position(bundle, &link.b)?;
        let corners = match bundle.packaging.link_routing {
            LinkRouting::Manhattan => vec![a, Point::new(b.x, a.y), b],
            LinkRouting::Direct => vec![a, b],
        };
        let points: Vec<String> = corners
            .into_iter()
            .map(|p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline class="link" data-index="{li}" points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##,
            points.join(" ")
        );
    }

    for inst in &bundle.placement.chiplets {
        let def = &bundle.chiplets[&inst.chiplet];
        for phy in 0..def.phys.len() {
            let (x, y) = px(geometry::phy_position(def, inst, phy)?);
            let _ = writeln!(s, r##"<circle class="phy" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#1d1d1d"/>"##);
        }
    }
    for (i, r) in bundle.placement.interposer_routers.iter().enumerate() {
        let (x, y) = px(r.position);
        let _ = writeln!(
            s,
            r##"<circle class="router" data-index="{i}" cx="{x:.2}" cy="{y:.2}" r="5" fill="#e67e22" stroke="#1d1d1d"/>"##
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
