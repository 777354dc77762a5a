//! World (W) and constraint (C) frames.
//!
//! Frame C is anchored at the needle tip pose at first tissue contact, with
//! its x-axis along the tip heading. The beam problem is solved in C.

use nalgebra::{Isometry2, Point2, Vector2};
use serde::{Deserialize, Serialize};

/// Planar pose `[x, y, θ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(self.heading.cos(), self.heading.sin())
    }

    /// Isometry mapping this pose's local coordinates into the parent frame.
    pub fn to_isometry(&self) -> Isometry2<f64> {
        Isometry2::new(Vector2::new(self.x, self.y), self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePair {
    pub world_to_constraint: Isometry2<f64>,
    pub constraint_to_world: Isometry2<f64>,
}

impl FramePair {
    pub fn to_constraint(&self, p: &Point2<f64>) -> Point2<f64> {
        self.world_to_constraint * p
    }

    pub fn to_world(&self, p: &Point2<f64>) -> Point2<f64> {
        self.constraint_to_world * p
    }

    /// Heading of the C x-axis in W.
    pub fn heading(&self) -> f64 {
        self.constraint_to_world.rotation.angle()
    }
}

/// Frames anchored at the first contact pose.
pub fn make_frames(contact: &Pose2) -> FramePair {
    let c_to_w = contact.to_isometry();
    FramePair {
        world_to_constraint: c_to_w.inverse(),
        constraint_to_world: c_to_w,
    }
}
