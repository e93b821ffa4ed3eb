use serde::{Deserialize, Serialize};

use super::GenError;
use crate::model::{ChipletDef, PhyDef, Point};

/// Named ways of spreading PHYs over a chiplet footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhyPlacementStyle {
    /// Evenly spaced along the perimeter, counter-clockwise from the bottom edge.
    PerimeterEven,
    /// One PHY per corner (at most 4).
    Corners,
    /// One PHY per edge midpoint (at most 4).
    EdgeCenters,
    /// A near-square grid of PHY banks inside the footprint.
    RowBanks,
}

/// Parameters shared by every chiplet of a generated design. The defaults
/// are the evaluation setup: 74 mm² base, 0.85 mm² per PHY, internal
/// latency 3 cycles and PHY latency 12 cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChipletParams {
    pub base_area_mm2: f64,
    pub base_power_w: f64,
    pub phy_area_overhead_mm2: f64,
    pub phy_power_overhead_w: f64,
    pub bump_pitch_mm: f64,
    pub internal_latency_cycles: f64,
    pub phy_latency_cycles: f64,
    /// Total share of the chiplet area whose bumps are split among the PHYs.
    pub bump_budget: f64,
}

impl Default for ChipletParams {
    fn default() -> Self {
        ChipletParams {
            base_area_mm2: 74.0,
            base_power_w: 10.0,
            phy_area_overhead_mm2: 0.85,
            phy_power_overhead_w: 0.5,
            bump_pitch_mm: 0.04,
            internal_latency_cycles: 3.0,
            phy_latency_cycles: 12.0,
            bump_budget: 1.0,
        }
    }
}

/// Builds a square chiplet whose area and power grow with its PHY count.
pub fn generate_chiplet(
    name: &str,
    params: &ChipletParams,
    phy_count: usize,
    style: PhyPlacementStyle,
) -> Result<ChipletDef, GenError> {
    if phy_count == 0 {
        return Err(GenError::Unsupported("a chiplet needs at least one PHY".into()));
    }
    let area = params.base_area_mm2 + phy_count as f64 * params.phy_area_overhead_mm2;
    let side = area.sqrt();
    let positions = phy_positions(style, phy_count, side, side)?;
    let fraction = params.bump_budget / phy_count as f64;
    Ok(ChipletDef {
        name: name.to_string(),
        width_mm: side,
        height_mm: side,
        internal_latency_cycles: params.internal_latency_cycles,
        phy_latency_cycles: params.phy_latency_cycles,
        power_w: params.base_power_w + phy_count as f64 * params.phy_power_overhead_w,
        bump_pitch_mm: params.bump_pitch_mm,
        phys: positions
            .into_iter()
            .map(|position| PhyDef {
                position,
                area_fraction: fraction,
            })
            .collect(),
        kind: "compute".into(),
    })
}

pub fn phy_positions(style: PhyPlacementStyle, n: usize, w: f64, h: f64) -> Result<Vec<Point>, GenError> {
    let too_many = |limit: usize| GenError::Unsupported(format!("{style:?} PHY placement hosts at most {limit} PHYs, got {n}"));
    match style {
        PhyPlacementStyle::Corners => {
            if n > 4 {
                return Err(too_many(4));
            }
            let all = [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)];
            Ok(all[..n].to_vec())
        }
        PhyPlacementStyle::EdgeCenters => {
            if n > 4 {
                return Err(too_many(4));
            }
            let all = [
                Point::new(w / 2.0, 0.0),
                Point::new(w, h / 2.0),
                Point::new(w / 2.0, h),
                Point::new(0.0, h / 2.0),
            ];
            Ok(all[..n].to_vec())
        }
        PhyPlacementStyle::PerimeterEven => {
            let perimeter = 2.0 * (w + h);
            Ok((0..n)
                .map(|k| perimeter_point((k as f64 + 0.5) * perimeter / n as f64, w, h))
                .collect())
        }
        PhyPlacementStyle::RowBanks => {
            let rows = (n as f64).sqrt().ceil() as usize;
            let cols = n.div_ceil(rows);
            Ok((0..n)
                .map(|k| {
                    let (r, c) = (k / cols, k % cols);
                    Point::new((c as f64 + 0.5) * w / cols as f64, (r as f64 + 0.5) * h / rows as f64)
                })
                .collect())
        }
    }
}

/// Point at arc length `s` along the footprint boundary, counter-clockwise
/// from the lower-left corner.
fn perimeter_point(s: f64, w: f64, h: f64) -> Point {
    if s < w {
        Point::new(s, 0.0)
    } else if s < w + h {
        Point::new(w, s - w)
    } else if s < 2.0 * w + h {
        Point::new(w - (s - w - h), h)
    } else {
        Point::new(0.0, h - (s - 2.0 * w - h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STYLES: [PhyPlacementStyle; 4] = [
        PhyPlacementStyle::PerimeterEven,
        PhyPlacementStyle::Corners,
        PhyPlacementStyle::EdgeCenters,
        PhyPlacementStyle::RowBanks,
    ];

    #[test]
    fn area_grows_with_phys() {
        let p = ChipletParams::default();
        let c = generate_chiplet("c", &p, 4, PhyPlacementStyle::Corners).unwrap();
        assert!((c.area_mm2() - 77.4).abs() < 1e-9);
        assert!((c.width_mm - 8.798).abs() < 1e-3);
        let c = generate_chiplet("c", &p, 18, PhyPlacementStyle::PerimeterEven).unwrap();
        assert!((c.area_mm2() - 89.3).abs() < 1e-9);
        assert!((c.power_w - (10.0 + 9.0)).abs() < 1e-12);
        assert!(c.phys.iter().all(|phy| (phy.area_fraction - 1.0 / 18.0).abs() < 1e-15));
    }

    #[test]
    fn corners_cap() {
        let p = ChipletParams::default();
        assert!(matches!(
            generate_chiplet("c", &p, 5, PhyPlacementStyle::Corners),
            Err(GenError::Unsupported(_))
        ));
        assert!(generate_chiplet("c", &p, 0, PhyPlacementStyle::PerimeterEven).is_err());
    }

    #[test]
    fn styles_place_distinct_points_on_footprint() {
        for style in STYLES {
            let max = if matches!(style, PhyPlacementStyle::Corners | PhyPlacementStyle::EdgeCenters) { 4 } else { 24 };
            for n in 1..=max {
                let pts = phy_positions(style, n, 8.0, 5.0).unwrap();
                assert_eq!(pts.len(), n);
                for (i, a) in pts.iter().enumerate() {
                    assert!(a.x >= -1e-12 && a.x <= 8.0 + 1e-12 && a.y >= -1e-12 && a.y <= 5.0 + 1e-12, "{style:?} {n}");
                    for b in &pts[i + 1..] {
                        assert!((a.x - b.x).abs() + (a.y - b.y).abs() > 1e-9, "{style:?} {n} duplicates");
                    }
                }
            }
        }
    }
}
