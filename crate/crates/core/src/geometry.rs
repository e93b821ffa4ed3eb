//! Placement geometry: rotated footprints, absolute PHY positions, link
//! lengths and the interposer bounding rectangle.
//!
//! Rotations keep the footprint anchored at the instance position: the chiplet
//! is rotated counter-clockwise about its own rectangle and then placed by its
//! lower-left corner.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{ChipletDef, ChipletInstance, DesignBundle, Endpoint, LinkRouting, Placement, Point, Rotation};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("chiplet {chiplet:?} has no PHY {phy}")]
    InvalidPhy { chiplet: String, phy: usize },
    #[error("placement is empty")]
    EmptyPlacement,
    #[error("unknown chiplet {0:?}")]
    UnknownChiplet(String),
}

/// Axis-aligned rectangle given by its lower-left and upper-right corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// True when the open interiors intersect by more than `tol` on both
    /// axes; shared edges do not count.
    pub fn overlaps_interior(&self, other: &Rect, tol: f64) -> bool {
        self.min.x + tol < other.max.x
            && other.min.x + tol < self.max.x
            && self.min.y + tol < other.max.y
            && other.min.y + tol < self.max.y
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }
}

/// Width and height of a chiplet after rotation.
pub fn rotated_size(def: &ChipletDef, rotation: Rotation) -> (f64, f64) {
    if rotation.swaps_axes() {
        (def.height_mm, def.width_mm)
    } else {
        (def.width_mm, def.height_mm)
    }
}

/// Maps a point relative to an unrotated `width`×`height` footprint into the
/// rotated footprint. One quarter turn sends (x, y) to (h − y, x).
pub fn rotate_local(p: Point, width: f64, height: f64, rotation: Rotation) -> Point {
    let (mut x, mut y) = (p.x, p.y);
    let (mut w, mut h) = (width, height);
    for _ in 0..rotation.quarter_turns() {
        let nx = h - y;
        let ny = x;
        x = nx;
        y = ny;
        std::mem::swap(&mut w, &mut h);
    }
    Point::new(x, y)
}

pub fn footprint(def: &ChipletDef, instance: &ChipletInstance) -> Rect {
    let (w, h) = rotated_size(def, instance.rotation);
    Rect {
        min: instance.position,
        max: Point::new(instance.position.x + w, instance.position.y + h),
    }
}

/// Absolute position of PHY `phy_index` of a placed chiplet.
pub fn phy_position(def: &ChipletDef, instance: &ChipletInstance, phy_index: usize) -> Result<Point, GeometryError> {
    let phy = def.phys.get(phy_index).ok_or_else(|| GeometryError::InvalidPhy {
        chiplet: def.name.clone(),
        phy: phy_index,
    })?;
    let local = rotate_local(phy.position, def.width_mm, def.height_mm, instance.rotation);
    Ok(Point::new(instance.position.x + local.x, instance.position.y + local.y))
}

/// Absolute attachment point of a link endpoint: the PHY for chiplets, the
/// router position for interposer routers.
pub fn endpoint_position(bundle: &DesignBundle, endpoint: &Endpoint) -> Result<Point, GeometryError> {
    match *endpoint {
        Endpoint::Chiplet { index, phy } => {
            let instance = &bundle.placement.chiplets[index];
            let def = bundle
                .chiplets
                .get(&instance.chiplet)
                .ok_or_else(|| GeometryError::UnknownChiplet(instance.chiplet.clone()))?;
            phy_position(def, instance, phy)
        }
        Endpoint::InterposerRouter { index } => Ok(bundle.placement.interposer_routers[index].position),
    }
}

pub fn link_length(a: Point, b: Point, rule: LinkRouting) -> f64 {
    let dx = (a.x - b.x).abs();
    let dy = (a.y - b.y).abs();
    match rule {
        LinkRouting::Manhattan => dx + dy,
        LinkRouting::Direct => dx.hypot(dy),
    }
}

/// Axis-aligned bounding box of all rotated chiplet footprints.
pub fn bounding_box(placement: &Placement, chiplets: &BTreeMap<String, ChipletDef>) -> Result<Rect, GeometryError> {
    let mut rects = placement.chiplets.iter().map(|inst| {
        chiplets
            .get(&inst.chiplet)
            .map(|def| footprint(def, inst))
            .ok_or_else(|| GeometryError::UnknownChiplet(inst.chiplet.clone()))
    });
    let first = rects.next().ok_or(GeometryError::EmptyPlacement)??;
    rects.try_fold(first, |acc, r| Ok(acc.union(&r?)))
}

/// (width, height) of the smallest axis-aligned rectangle enclosing all chiplets.
pub fn enclosing_rectangle(
    placement: &Placement,
    chiplets: &BTreeMap<String, ChipletDef>,
) -> Result<(f64, f64), GeometryError> {
    let r = bounding_box(placement, chiplets)?;
    Ok((r.width(), r.height()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhyDef;
    use proptest::prelude::*;

    fn chiplet(w: f64, h: f64, phys: &[(f64, f64)]) -> ChipletDef {
        ChipletDef {
            name: "c".into(),
            width_mm: w,
            height_mm: h,
            internal_latency_cycles: 0.0,
            phy_latency_cycles: 0.0,
            power_w: 0.0,
            bump_pitch_mm: 0.1,
            phys: phys
                .iter()
                .map(|&(x, y)| PhyDef {
                    position: Point::new(x, y),
                    area_fraction: 0.1,
                })
                .collect(),
            kind: String::new(),
        }
    }

    fn inst(x: f64, y: f64, rotation: Rotation) -> ChipletInstance {
        ChipletInstance {
            chiplet: "c".into(),
            position: Point::new(x, y),
            rotation,
        }
    }

    #[test]
    fn phy_identity_rotation() {
        let def = chiplet(4.0, 4.0, &[(1.0, 2.0)]);
        assert_eq!(phy_position(&def, &inst(10.0, 20.0, Rotation::R0), 0).unwrap(), Point::new(11.0, 22.0));
    }

    #[test]
    fn phy_quarter_and_half_turn() {
        let def = chiplet(4.0, 2.0, &[(4.0, 0.0), (0.0, 0.0)]);
        assert_eq!(phy_position(&def, &inst(0.0, 0.0, Rotation::R90), 0).unwrap(), Point::new(2.0, 4.0));
        assert_eq!(phy_position(&def, &inst(0.0, 0.0, Rotation::R180), 1).unwrap(), Point::new(4.0, 2.0));
    }

    #[test]
    fn phy_out_of_range() {
        let def = chiplet(4.0, 2.0, &[]);
        assert!(matches!(
            phy_position(&def, &inst(0.0, 0.0, Rotation::R0), 3),
            Err(GeometryError::InvalidPhy { phy: 3, .. })
        ));
    }

    #[test]
    fn lengths() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(link_length(o, o, LinkRouting::Manhattan), 0.0);
        assert_eq!(link_length(o, o, LinkRouting::Direct), 0.0);
        assert_eq!(link_length(o, Point::new(3.0, 4.0), LinkRouting::Manhattan), 7.0);
        assert_eq!(link_length(o, Point::new(3.0, 4.0), LinkRouting::Direct), 5.0);
    }

    fn lib(def: ChipletDef) -> BTreeMap<String, ChipletDef> {
        BTreeMap::from([(def.name.clone(), def)])
    }

    #[test]
    fn enclosing() {
        let chiplets = lib(chiplet(4.0, 2.0, &[]));
        let single = Placement {
            chiplets: vec![inst(0.0, 0.0, Rotation::R0)],
            interposer_routers: vec![],
        };
        assert_eq!(enclosing_rectangle(&single, &chiplets).unwrap(), (4.0, 2.0));
        let rotated = Placement {
            chiplets: vec![inst(0.0, 0.0, Rotation::R90)],
            interposer_routers: vec![],
        };
        assert_eq!(enclosing_rectangle(&rotated, &chiplets).unwrap(), (2.0, 4.0));

        let unit = lib(chiplet(1.0, 1.0, &[]));
        let two = Placement {
            chiplets: vec![inst(0.0, 0.0, Rotation::R0), inst(5.0, 3.0, Rotation::R0)],
            interposer_routers: vec![],
        };
        assert_eq!(enclosing_rectangle(&two, &unit).unwrap(), (6.0, 4.0));
        assert_eq!(
            enclosing_rectangle(&Placement::default(), &unit),
            Err(GeometryError::EmptyPlacement)
        );
    }

    #[test]
    fn touching_rectangles_do_not_overlap() {
        let a = Rect {
            min: Point::new(0.0, 0.0),
            max: Point::new(1.0, 1.0),
        };
        let b = Rect {
            min: Point::new(1.0, 0.0),
            max: Point::new(2.0, 1.0),
        };
        let c = Rect {
            min: Point::new(0.5, 0.5),
            max: Point::new(2.0, 2.0),
        };
        assert!(!a.overlaps_interior(&b, 0.0));
        assert!(a.overlaps_interior(&c, 0.0));
    }

    fn rotation() -> impl Strategy<Value = Rotation> {
        prop_oneof![
            Just(Rotation::R0),
            Just(Rotation::R90),
            Just(Rotation::R180),
            Just(Rotation::R270)
        ]
    }

    proptest! {
        #[test]
        fn direct_never_exceeds_manhattan(ax in -1e3..1e3f64, ay in -1e3..1e3f64, bx in -1e3..1e3f64, by in -1e3..1e3f64) {
            let a = Point::new(ax, ay);
            let b = Point::new(bx, by);
            prop_assert!(link_length(a, b, LinkRouting::Direct) <= link_length(a, b, LinkRouting::Manhattan) + 1e-9);
        }

        #[test]
        fn four_quarter_turns_return_home(w in 0.1..50.0f64, h in 0.1..50.0f64, fx in 0.0..=1.0f64, fy in 0.0..=1.0f64,
                                          px in -100.0..100.0f64, py in -100.0..100.0f64, start in rotation()) {
            let def = chiplet(w, h, &[(fx * w, fy * h)]);
            let mut instance = ChipletInstance { chiplet: "c".into(), position: Point::new(px, py), rotation: start };
            let original = phy_position(&def, &instance, 0).unwrap();
            let mut seen_inside = true;
            for _ in 0..4 {
                instance.rotation = instance.rotation.next();
                let p = phy_position(&def, &instance, 0).unwrap();
                let r = footprint(&def, &instance);
                seen_inside &= p.x >= r.min.x - 1e-9 && p.x <= r.max.x + 1e-9 && p.y >= r.min.y - 1e-9 && p.y <= r.max.y + 1e-9;
            }
            let back = phy_position(&def, &instance, 0).unwrap();
            prop_assert!(seen_inside);
            prop_assert!((back.x - original.x).abs() < 1e-9 && (back.y - original.y).abs() < 1e-9);
        }

        #[test]
        fn enclosing_is_translation_covariant(
            items in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64, rotation()), 1..8),
            dx in -50.0..50.0f64, dy in -50.0..50.0f64,
        ) {
            let chiplets = lib(chiplet(3.0, 1.5, &[]));
            let a = Placement { chiplets: items.iter().map(|&(x, y, r)| inst(x, y, r)).collect(), interposer_routers: vec![] };
            let b = Placement { chiplets: items.iter().map(|&(x, y, r)| inst(x + dx, y + dy, r)).collect(), interposer_routers: vec![] };
            let (wa, ha) = enclosing_rectangle(&a, &chiplets).unwrap();
            let (wb, hb) = enclosing_rectangle(&b, &chiplets).unwrap();
            prop_assert!((wa - wb).abs() < 1e-9 && (ha - hb).abs() < 1e-9);
        }
    }
}
