//! Lévy distance after the compactifying transform of the real line onto
//! `(-1, 1)`.
//!
//! A field becomes a distribution function `phi` on `[-1, 1]`; the Lévy
//! distance between two such functions is the largest horizontal gap
//! between their completed graphs measured along lines `s + y = t`.

use super::{Mode, TailField};

/// Largest step in `s` of one linear piece of a transformed linear segment.
const MAX_PIECE: f64 = 0.005;

fn to_unit(w: f64) -> f64 {
    if w >= 0.0 {
        -(-w).exp_m1()
    } else {
        w.exp_m1()
    }
}

/// Completed graph of `phi` as `(t, s)` vertices with `t = s + phi`.
fn completed_graph(x: &TailField) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(2 * x.grid.len() + 4);
    let mut push = |s: f64, y: f64| pts.push((s + y, s));
    push(-1.0, 0.0);
    let mut y = 1.0 - x.x_neg_inf;
    push(-1.0, y);
    match x.mode {
        Mode::Step => {
            for (w, v) in x.grid.iter().zip(&x.values) {
                let s = to_unit(*w);
                push(s, y);
                y = 1.0 - v;
                push(s, y);
            }
        }
        Mode::Linear => {
            let s0 = to_unit(x.grid[0]);
            push(s0, y);
            y = 1.0 - x.values[0];
            push(s0, y);
            for i in 0..x.grid.len() - 1 {
                let (w0, w1) = (x.grid[i], x.grid[i + 1]);
                let (v0, v1) = (x.values[i], x.values[i + 1]);
                let span = to_unit(w1) - to_unit(w0);
                let pieces = ((span / MAX_PIECE).ceil() as usize).clamp(1, 256);
                for p in 1..=pieces {
                    let f = p as f64 / pieces as f64;
                    let w = w0 + f * (w1 - w0);
                    push(to_unit(w), 1.0 - (v0 + f * (v1 - v0)));
                }
            }
            y = 1.0 - x.x_pos_inf();
        }
    }
    push(1.0, y);
    push(1.0, 1.0);
    pts
}

fn s_at(poly: &[(f64, f64)], cursor: &mut usize, t: f64) -> f64 {
    while *cursor + 1 < poly.len() && poly[*cursor + 1].0 <= t {
        *cursor += 1;
    }
    let (t0, s0) = poly[*cursor];
    if *cursor + 1 == poly.len() {
        return s0;
    }
    let (t1, s1) = poly[*cursor + 1];
    if t1 <= t0 {
        return s1;
    }
    s0 + (s1 - s0) * (t - t0) / (t1 - t0)
}

/// Lévy distance between the transformed fields.
pub fn levy_distance(x: &TailField, y: &TailField) -> f64 {
    let a = completed_graph(x);
    let b = completed_graph(y);
    let (mut ia, mut ib) = (0, 0);
    let (mut ca, mut cb) = (0, 0);
    let mut worst: f64 = 0.0;
    while ia < a.len() || ib < b.len() {
        let t = if ib == b.len() || (ia < a.len() && a[ia].0 <= b[ib].0) {
            ia += 1;
            a[ia - 1].0
        } else {
            ib += 1;
            b[ib - 1].0
        };
        let d = (s_at(&a, &mut ca, t) - s_at(&b, &mut cb, t)).abs();
        worst = worst.max(d);
    }
    worst
}
