use serde::{Deserialize, Serialize};

use crate::model::{ChipletDef, ChipletInstance, Placement, Point, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    Grid,
    /// Brick pattern: odd rows shifted right by half a pitch.
    Hex,
}

/// Row-major placement of `rows`×`cols` copies of `chiplet`.
pub fn generate_placement(kind: PlacementKind, rows: usize, cols: usize, chiplet: &ChipletDef, spacing_mm: f64) -> Placement {
    let defs = vec![chiplet; rows * cols];
    generate_mixed_placement(kind, rows, cols, &defs, spacing_mm)
}

/// Row-major placement with one definition per instance. The grid pitch is
/// set by the largest footprint; smaller chiplets are centered in their cell.
pub fn generate_mixed_placement(
    kind: PlacementKind,
    rows: usize,
    cols: usize,
    chiplets: &[&ChipletDef],
    spacing_mm: f64,
) -> Placement {
    assert_eq!(chiplets.len(), rows * cols, "one chiplet definition per grid cell");
    let cell_w = chiplets.iter().map(|c| c.width_mm).fold(0.0, f64::max);
    let cell_h = chiplets.iter().map(|c| c.height_mm).fold(0.0, f64::max);
    let pitch_x = cell_w + spacing_mm;
    let pitch_y = cell_h + spacing_mm;
    let instances = chiplets
        .iter()
        .enumerate()
        .map(|(i, def)| {
            let (r, c) = (i / cols, i % cols);
            let shift = match kind {
                PlacementKind::Hex if r % 2 == 1 => pitch_x / 2.0,
                _ => 0.0,
            };
            ChipletInstance {
                chiplet: def.name.clone(),
                position: Point::new(
                    c as f64 * pitch_x + shift + (cell_w - def.width_mm) / 2.0,
                    r as f64 * pitch_y + (cell_h - def.height_mm) / 2.0,
                ),
                rotation: Rotation::R0,
            }
        })
        .collect();
    Placement {
        chiplets: instances,
        interposer_routers: vec![],
    }
}
