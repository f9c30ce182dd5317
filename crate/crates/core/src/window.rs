//! Separable sliding-window extrema over row-major d-dimensional arrays.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    #[inline]
    fn dominates(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Max => a >= b,
            Extremum::Min => a <= b,
        }
    }
}

/// Sliding extremum of width `width` along one axis, keeping only windows
/// that fit entirely inside the array. The axis length shrinks to
/// `len - width + 1`.
pub fn sliding_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    width: usize,
    kind: Extremum,
) -> (Vec<f64>, Vec<usize>) {
    assert!(width >= 1 && width <= shape[axis], "window wider than axis");
    let len = shape[axis];
    let out_len = len - width + 1;
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out_shape = shape.to_vec();
    out_shape[axis] = out_len;
    let mut out = vec![0.0; outer * out_len * inner];
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(width + 1);
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| data[(o * len + k) * inner + i];
            deque.clear();
            for k in 0..len {
                let v = at(k);
                while let Some(&back) = deque.back() {
                    if kind.dominates(v, at(back)) {
                        deque.pop_back();
                    } else {
                        break;
                    }
                }
                deque.push_back(k);
                if let Some(&front) = deque.front() {
                    if front + width <= k {
                        deque.pop_front();
                    }
                }
                if k + 1 >= width {
                    let start = k + 1 - width;
                    out[(o * out_len + start) * inner + i] = at(*deque.front().unwrap());
                }
            }
        }
    }
    (out, out_shape)
}

/// Extremum over every full hypercube window of side `width`.
pub fn sliding_hypercube(data: &[f64], shape: &[usize], width: usize, kind: Extremum) -> (Vec<f64>, Vec<usize>) {
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for axis in 0..shape.len() {
        let (next, next_shape) = sliding_axis(&cur, &cur_shape, axis, width, kind);
        cur = next;
        cur_shape = next_shape;
    }
    (cur, cur_shape)
}
