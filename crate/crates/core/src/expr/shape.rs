//! Output-shape rules for layer kinds.

use crate::diag::{DResult, DiagKind, Diagnostic, Span};

pub type Shape = Vec<usize>;

pub fn mismatch(site: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagKind::ShapeMismatch, site, msg)
}

/// `floor((input + 2·pad − k)/stride) + 1`, or an error when below 1.
pub fn window_extent(input: usize, k: usize, stride: usize, pad: usize, site: Span) -> DResult<usize> {
    let padded = input + 2 * pad;
    if padded < k || stride == 0 {
        return Err(Diagnostic::new(
            DiagKind::NonPositiveExtent,
            site,
            format!("window {k} with pad {pad} does not fit extent {input}"),
        ));
    }
    Ok((padded - k) / stride + 1)
}

fn rank4(x: &[usize], what: &str, site: Span) -> DResult<[usize; 4]> {
    match x {
        [n, c, h, w] => Ok([*n, *c, *h, *w]),
        _ => Err(mismatch(site, format!("{what} expects a rank-4 input (N,C,H,W), found {x:?}"))),
    }
}

/// `x (N,C,H,W)`, `w (O,C,K,K)`, `b (O)` → `(N,O,H',W')`.
pub fn conv(x: &[usize], w: &[usize], b: &[usize], stride: usize, pad: usize, site: Span) -> DResult<Shape> {
    let [n, c, h, wd] = rank4(x, "conv", site)?;
    let [o, ci, kh, kw] = rank4(w, "conv filter", site)?;
    if ci != c {
        return Err(mismatch(site, format!("conv filter expects {ci} input channels, found {c}")));
    }
    if b != [o] {
        return Err(mismatch(site, format!("conv bias must be [{o}], found {b:?}")));
    }
    Ok(vec![n, o, window_extent(h, kh, stride, pad, site)?, window_extent(wd, kw, stride, pad, site)?])
}

pub fn pool(x: &[usize], k: usize, stride: usize, pad: usize, site: Span) -> DResult<Shape> {
    let [n, c, h, w] = rank4(x, "pooling", site)?;
    Ok(vec![n, c, window_extent(h, k, stride, pad, site)?, window_extent(w, k, stride, pad, site)?])
}

/// Channel concatenation along axis 1.
pub fn concat(xs: &[&[usize]], site: Span) -> DResult<Shape> {
    let first = xs.first().ok_or_else(|| mismatch(site, "concat of no branches"))?;
    if first.len() < 2 {
        return Err(mismatch(site, format!("concat expects rank ≥ 2 branches, found {first:?}")));
    }
    let mut out = first.to_vec();
    out[1] = 0;
    for x in xs {
        let same = x.len() == first.len() && x.iter().zip(first.iter()).enumerate().all(|(i, (a, b))| i == 1 || a == b);
        if !same {
            return Err(mismatch(site, format!("concat branches disagree outside channels: {first:?} vs {x:?}")));
        }
        out[1] += x[1];
    }
    Ok(out)
}

/// Keeps axes before `axis` and merges the rest.
pub fn flatten(x: &[usize], rank: usize, axis: usize, site: Span) -> DResult<Shape> {
    if x.len() != rank {
        return Err(mismatch(site, format!("flatten expects rank {rank}, found {x:?}")));
    }
    if axis >= rank {
        return Err(mismatch(site, format!("flatten axis {axis} out of range for rank {rank}")));
    }
    let mut out = x[..axis].to_vec();
    out.push(x[axis..].iter().product());
    Ok(out)
}

pub fn positive(dims: &[usize], site: Span) -> DResult<()> {
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Diagnostic::new(DiagKind::NonPositiveExtent, site, format!("extent {i} of {dims:?} is zero")));
    }
    Ok(())
}

pub fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}
