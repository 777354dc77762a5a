//! Published tissue parameter sets and the example scenes built from them.
//!
//! The Ogden parameters and bevel offsets are the tuned values reported for
//! the plastisol phantoms and chicken breast. Bevel offsets are given in
//! millimetres. Layer boundary positions are not published; the scenes below
//! use representative band widths inside an 80 mm phantom.

use nalgebra::Point2;

use crate::tissue::{Boundary, OgdenLayer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    pub label: &'static str,
    /// `(μ [Pa], α)` per layer.
    pub layers: &'static [(f64, f64)],
    pub bevel_mm: f64,
}

const PH2: &[(f64, f64)] = &[(2e5, 1.0), (3.3e7, -1.0), (2e5, 1.0), (3.3e7, -1.0)];
const PH2_REFIT: &[(f64, f64)] = &[(2.2e5, 1.0), (3.2e7, -1.0), (2.2e5, 1.0), (3.2e7, -1.0)];

pub const TABLE: [ParameterSet; 10] = [
    ParameterSet { label: "Ph2 T4", layers: PH2, bevel_mm: 0.085 },
    ParameterSet {
        label: "Ph1 T5",
        layers: &[(2e5, 1.0), (3.3e7, -1.0), (2e6, 1.0), (3.3e7, -1.0)],
        bevel_mm: 0.03,
    },
    ParameterSet { label: "Ph2 T5", layers: PH2, bevel_mm: 0.085 },
    ParameterSet { label: "Ph3 T5", layers: PH2, bevel_mm: 0.03 },
    ParameterSet { label: "Ch T5", layers: &[(1e3, 1.0)], bevel_mm: 0.085 },
    ParameterSet { label: "Ph2 T6 St1", layers: PH2_REFIT, bevel_mm: 0.085 },
    ParameterSet {
        label: "Ph2 T6 St2",
        layers: &[(5e4, 1.0), (1e7, -1.0), (5e4, 1.0), (1e7, -1.0)],
        bevel_mm: 0.085,
    },
    ParameterSet {
        label: "Ph2 T6 St3",
        layers: &[(2.2e5, 0.85), (3.2e7, -0.98), (2.2e5, 0.85), (3.2e7, -0.98)],
        bevel_mm: 0.085,
    },
    ParameterSet { label: "Ph2 T6 St4", layers: PH2_REFIT, bevel_mm: 0.085 },
    ParameterSet { label: "Ch T6 St5", layers: &[(4e3, 0.2)], bevel_mm: 0.085 },
];

/// Renders the table as CSV, one row per set, four layer slots each.
pub fn table_csv() -> String {
    let mut out = String::from("set,mu1,alpha1,mu2,alpha2,mu3,alpha3,mu4,alpha4,b_mm\n");
    for set in &TABLE {
        out.push_str(set.label);
        for i in 0..4 {
            match set.layers.get(i) {
                Some((mu, alpha)) => out.push_str(&format!(",{mu:e},{alpha}")),
                None => out.push_str(",n/a,n/a"),
            }
        }
        out.push_str(&format!(",{}\n", set.bevel_mm));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub parameters: ParameterSet,
    /// Entry-side boundary of each layer along W x (mm).
    pub boundaries_mm: &'static [f64],
    pub description: &'static str,
}

impl Preset {
    pub fn layers(&self) -> Vec<OgdenLayer> {
        self.parameters
            .layers
            .iter()
            .zip(self.boundaries_mm)
            .enumerate()
            .map(|(i, (&(mu, alpha), &x_mm))| {
                OgdenLayer::new(
                    format!("L{}", i + 1),
                    mu,
                    alpha,
                    Boundary::new(Point2::new(x_mm * 1e-3, 0.0), 0.0),
                )
            })
            .collect()
    }

    pub fn bevel_offset(&self) -> f64 {
        self.parameters.bevel_mm * 1e-3
    }
}

const PHANTOM_BANDS: &[f64] = &[0.0, 20.0, 26.0, 42.0];
const PHANTOM1_BANDS: &[f64] = &[0.0, 12.0, 27.0, 45.0];

fn set(label: &str) -> ParameterSet {
    *TABLE.iter().find(|s| s.label == label).expect("label present in table")
}

pub fn all() -> Vec<Preset> {
    vec![
        Preset {
            name: "ph1",
            parameters: set("Ph1 T5"),
            boundaries_mm: PHANTOM1_BANDS,
            description: "four-layer phantom 1",
        },
        Preset {
            name: "ph2",
            parameters: set("Ph2 T4"),
            boundaries_mm: PHANTOM_BANDS,
            description: "four-layer phantom 2 (fat/muscle, diaphragm, soft tissue, prostate)",
        },
        Preset {
            name: "ph3",
            parameters: set("Ph3 T5"),
            boundaries_mm: PHANTOM_BANDS,
            description: "four-layer phantom 3, replica of phantom 2",
        },
        Preset {
            name: "chicken",
            parameters: set("Ch T5"),
            boundaries_mm: &[0.0],
            description: "chicken breast, single layer",
        },
        Preset {
            name: "ph2-st1",
            parameters: set("Ph2 T6 St1"),
            boundaries_mm: PHANTOM_BANDS,
            description: "phantom 2 refit, validation study 1",
        },
        Preset {
            name: "ph2-st2",
            parameters: set("Ph2 T6 St2"),
            boundaries_mm: PHANTOM_BANDS,
            description: "phantom 2 refit, validation study 2",
        },
        Preset {
            name: "ph2-st3",
            parameters: set("Ph2 T6 St3"),
            boundaries_mm: PHANTOM_BANDS,
            description: "phantom 2 refit, validation study 3",
        },
        Preset {
            name: "ph2-st4",
            parameters: set("Ph2 T6 St4"),
            boundaries_mm: PHANTOM_BANDS,
            description: "phantom 2 refit, validation study 4",
        },
        Preset {
            name: "chicken-st5",
            parameters: set("Ch T6 St5"),
            boundaries_mm: &[0.0],
            description: "chicken breast refit, validation study 5",
        },
    ]
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    all().iter().map(|p| p.name).collect()
}
