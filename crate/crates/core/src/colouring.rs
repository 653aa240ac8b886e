//! Edge colourings: explicit maps plus on-demand sources (seeded random,
//! distance bands, vertex parity) used by the pipeline's colouring portfolio.
//! All sources are deterministic functions of the sorted edge and their
//! parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::GroundGraph;
use crate::hypergraph::{window_span, HyperVertex, Hypergraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColouringError {
    #[error("colour {0} out of range (palette {1})")]
    ColourOutOfRange(u16, u16),
    #[error("palette must be nonempty")]
    EmptyPalette,
    #[error("colouring is not total: missing {0}")]
    NotTotal(String),
}

/// Answers colour queries for sorted edges. Colours are `0..colours()`.
pub trait EdgeColour<V: HyperVertex> {
    fn colours(&self) -> u16;
    fn colour_of(&self, edge: &[V]) -> u16;
}

/// An explicit edge → colour map with a fixed palette size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colouring<V: HyperVertex> {
    s: u16,
    map: BTreeMap<Vec<V>, u16>,
}

impl<V: HyperVertex> Colouring<V> {
    pub fn new(s: u16, map: BTreeMap<Vec<V>, u16>) -> Result<Self, ColouringError> {
        if s == 0 {
            return Err(ColouringError::EmptyPalette);
        }
        for (e, &c) in &map {
            if c >= s {
                return Err(ColouringError::ColourOutOfRange(c, s));
            }
            debug_assert!(e.windows(2).all(|w| w[0] < w[1]), "edges must be sorted");
        }
        Ok(Self { s, map })
    }

    /// Checks totality against a host hypergraph.
    pub fn validate_total(&self, host: &Hypergraph<V>) -> Result<(), ColouringError> {
        for e in host.edges() {
            if !self.map.contains_key(e) {
                return Err(ColouringError::NotTotal(format!("{e:?}")));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<V>, u16)> + '_ {
        self.map.iter().map(|(e, &c)| (e, c))
    }

    /// Colours every edge of `host` by a deterministic function.
    pub fn from_fn<F: Fn(&[V]) -> u16>(s: u16, host: &Hypergraph<V>, f: F) -> Result<Self, ColouringError> {
        let map = host.edges().map(|e| (e.clone(), f(e) % s)).collect();
        Self::new(s, map)
    }
}

impl<V: HyperVertex> EdgeColour<V> for Colouring<V> {
    fn colours(&self) -> u16 {
        self.s
    }
    fn colour_of(&self, edge: &[V]) -> u16 {
        *self.map.get(edge).unwrap_or_else(|| {
            panic!("colouring queried on a non-edge {edge:?}");
        })
    }
}

/// Everything gets colour 0.
#[derive(Debug, Clone, Copy)]
pub struct MonoColouring;

impl<V: HyperVertex> EdgeColour<V> for MonoColouring {
    fn colours(&self) -> u16 {
        1
    }
    fn colour_of(&self, _edge: &[V]) -> u16 {
        0
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seeded pseudo-random colouring of ground-vertex edges, computed on demand
/// so that arbitrarily large hosts need no storage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct SeededColouring {
    pub s: u16,
    pub seed: u64,
}

impl EdgeColour<u32> for SeededColouring {
    fn colours(&self) -> u16 {
        self.s
    }
    fn colour_of(&self, edge: &[u32]) -> u16 {
        let mut h = splitmix64(self.seed);
        for &v in edge {
            h = splitmix64(h ^ u64::from(v));
        }
        (h % u64::from(self.s)) as u16
    }
}

/// Adversary: colour by the band of the edge's ground-distance span.
pub struct DistanceBandColouring<'g> {
    pub s: u16,
    pub width: u32,
    pub g: &'g GroundGraph,
}

impl<'g> EdgeColour<u32> for DistanceBandColouring<'g> {
    fn colours(&self) -> u16 {
        self.s
    }
    fn colour_of(&self, edge: &[u32]) -> u16 {
        let span = window_span(self.g, edge);
        let band = if span == crate::ground::INF_DIST {
            u64::from(self.s) - 1
        } else {
            u64::from(span / self.width.max(1))
        };
        (band % u64::from(self.s)) as u16
    }
}

/// Adversary: parity of the vertex-index sum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct ParityColouring {
    pub s: u16,
}

impl EdgeColour<u32> for ParityColouring {
    fn colours(&self) -> u16 {
        self.s
    }
    fn colour_of(&self, edge: &[u32]) -> u16 {
        let sum: u64 = edge.iter().map(|&v| u64::from(v)).sum();
        (sum % u64::from(self.s)) as u16
    }
}

/// Serializable description of a colouring source, so certificates can be
/// re-verified from scratch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChiSpec {
    Mono,
    Random { s: u16, seed: u64 },
    DistanceBand { s: u16, width: u32 },
    Parity { s: u16 },
    File { path: String, s: u16 },
}

impl ChiSpec {
    pub fn colours(&self) -> u16 {
        match self {
            ChiSpec::Mono => 1,
            ChiSpec::Random { s, .. }
            | ChiSpec::DistanceBand { s, .. }
            | ChiSpec::Parity { s }
            | ChiSpec::File { s, .. } => *s,
        }
    }

    /// Builds the colouring; `File` variants must be resolved by the caller.
    pub fn build<'g>(
        &self,
        g: &'g GroundGraph,
        file: Option<Colouring<u32>>,
    ) -> Option<Box<dyn EdgeColour<u32> + 'g>> {
        match self {
            ChiSpec::Mono => Some(Box::new(MonoColouring)),
            ChiSpec::Random { s, seed } => Some(Box::new(SeededColouring { s: *s, seed: *seed })),
            ChiSpec::DistanceBand { s, width } => Some(Box::new(DistanceBandColouring {
                s: *s,
                width: *width,
                g,
            })),
            ChiSpec::Parity { s } => Some(Box::new(ParityColouring { s: *s })),
            ChiSpec::File { .. } => file.map(|c| Box::new(c) as Box<dyn EdgeColour<u32> + 'g>),
        }
    }
}
