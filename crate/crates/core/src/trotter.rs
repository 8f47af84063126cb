//! Trotter splittings of a nearest-neighbour chain into two commuting layers.
//!
//! Layer [`Parity::Odd`] holds bonds `0, 2, 4, …` (the odd bonds when
//! counting from one) and [`Parity::Even`] holds bonds `1, 3, …`.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn first_bond(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    /// Bonds of this layer on a chain of `n_sites`, ascending.
    pub fn bonds(self, n_sites: usize) -> impl DoubleEndedIterator<Item = usize> {
        (self.first_bond()..n_sites.saturating_sub(1)).step_by(2)
    }
}

/// One layer: every bond of `parity` evolved for `fraction · dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub parity: Parity,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrotterOrder {
    /// Symmetric `Odd(½) Even(1) Odd(½)`.
    Second,
    #[default]
    Fourth,
}

/// Fourth-order sequence as `(weight, transposed)`; each sweep lasts
/// `weight · dt / 12`. A plain sweep is `Odd` then `Even`, a transposed one
/// `Even` then `Odd`.
pub const FOURTH_ORDER_SWEEPS: [(i32, bool); 18] = [
    (1, true),
    (1, false),
    (1, true),
    (-2, false),
    (1, true),
    (1, true),
    (1, true),
    (1, true),
    (1, false),
    (1, true),
    (1, false),
    (1, false),
    (1, false),
    (1, false),
    (-2, true),
    (1, false),
    (1, true),
    (1, false),
];

fn push_merged(out: &mut Vec<Layer>, layer: Layer) {
    match out.last_mut() {
        Some(last) if last.parity == layer.parity => last.fraction += layer.fraction,
        _ => out.push(layer),
    }
}

/// Layers of a single step with adjacent same-parity layers merged.
pub fn step_layers(order: TrotterOrder) -> Vec<Layer> {
    let mut out = Vec::new();
    match order {
        TrotterOrder::Second => {
            out.push(Layer {
                parity: Parity::Odd,
                fraction: 0.5,
            });
            out.push(Layer {
                parity: Parity::Even,
                fraction: 1.0,
            });
            out.push(Layer {
                parity: Parity::Odd,
                fraction: 0.5,
            });
        }
        TrotterOrder::Fourth => {
            for &(w, transposed) in &FOURTH_ORDER_SWEEPS {
                let fraction = f64::from(w) / 12.0;
                let (a, b) = if transposed {
                    (Parity::Even, Parity::Odd)
                } else {
                    (Parity::Odd, Parity::Even)
                };
                push_merged(&mut out, Layer { parity: a, fraction });
                push_merged(&mut out, Layer { parity: b, fraction });
            }
        }
    }
    out
}

/// Layers of `n_steps` consecutive steps, merged across step boundaries.
pub fn fused_layers(order: TrotterOrder, n_steps: usize) -> Vec<Layer> {
    let one = step_layers(order);
    let mut out = Vec::with_capacity(one.len() * n_steps);
    for _ in 0..n_steps {
        for &l in &one {
            push_merged(&mut out, l);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for order in [TrotterOrder::Second, TrotterOrder::Fourth] {
            for p in [Parity::Odd, Parity::Even] {
                let total: f64 = step_layers(order)
                    .iter()
                    .filter(|l| l.parity == p)
                    .map(|l| l.fraction)
                    .sum();
                assert!((total - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fourth_order_layer_counts() {
        let one = step_layers(TrotterOrder::Fourth);
        assert_eq!(one.len(), 25);
        assert_eq!(one[0].parity, Parity::Even);
        assert_eq!(one[24].parity, Parity::Even);
        assert_eq!(fused_layers(TrotterOrder::Fourth, 3).len(), 73);
        for w in one.windows(2) {
            assert_ne!(w[0].parity, w[1].parity);
        }
    }

    #[test]
    fn bonds_of_layers() {
        let odd: Vec<usize> = Parity::Odd.bonds(6).collect();
        let even: Vec<usize> = Parity::Even.bonds(6).collect();
        assert_eq!(odd, [0, 2, 4]);
        assert_eq!(even, [1, 3]);
    }
}
