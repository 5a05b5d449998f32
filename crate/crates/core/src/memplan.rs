//! Static memory accounting of a compiled train body.

use crate::expr::lower::{lower, Lowered};
use crate::expr::TNode;
use crate::ir::schedule::bytes;
use crate::ir::{render_stmt, InPlace, IrProgram, Names, Stmt};

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryRow {
    pub stmt: String,
    /// Present for allocating statements.
    pub dims: Option<Vec<usize>>,
    pub delta_mb: f32,
    pub total_dealloc_mb: f32,
    pub total_reuse_mb: f32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MemoryReport {
    pub rows: Vec<MemoryRow>,
    pub peak_dealloc_mb: f32,
    pub peak_reuse_mb: f32,
    /// Parameters and their velocities.
    pub param_mb: f32,
    /// Gradient buffers, one per parameter.
    pub grad_mb: f32,
    pub workspace_mb: f32,
    /// Convolution kernels whose im2col buffer does not fit the cap.
    pub direct_convs: Vec<String>,
}

impl MemoryReport {
    pub fn grand_total_dealloc_mb(&self) -> f32 {
        self.peak_dealloc_mb + self.param_mb + self.grad_mb + self.workspace_mb
    }

    pub fn grand_total_reuse_mb(&self) -> f32 {
        self.peak_reuse_mb + self.param_mb + self.grad_mb + self.workspace_mb
    }
}

fn mb(b: usize) -> f32 {
    b as f32 / 1.0e6f32
}

fn signed_mb(b: i64) -> f32 {
    b as f32 / 1.0e6f32
}

pub fn analyze(p: &IrProgram) -> MemoryReport {
    let g = &p.graph;
    let names = Names::new([p.train.as_slice()]);
    let mut rows = Vec::with_capacity(p.train.len());
    // totals are kept in bytes and converted per row, like the deltas
    let (mut dealloc, mut reuse) = (0i64, 0i64);
    let (mut peak_d, mut peak_r) = (0i64, 0i64);
    for s in &p.train {
        let (dims, delta) = match s {
            Stmt::Let { node, inplace } => {
                let d = if *inplace == InPlace::Yes { 0 } else { bytes(g, *node) as i64 };
                (Some(g.shape(*node).to_vec()), d)
            }
            Stmt::Dealloc { node, .. } => (None, -(bytes(g, *node) as i64)),
            _ => (None, 0),
        };
        dealloc += delta;
        reuse += delta.max(0);
        peak_d = peak_d.max(dealloc);
        peak_r = peak_r.max(reuse);
        rows.push(MemoryRow {
            stmt: render_stmt(g, &names, s),
            dims,
            delta_mb: signed_mb(delta),
            total_dealloc_mb: signed_mb(dealloc),
            total_reuse_mb: signed_mb(reuse),
        });
    }
    let (param_mb, grad_mb) = static_params(p);
    let (workspace_mb, direct_convs) = static_workspace(p);
    MemoryReport {
        rows,
        peak_dealloc_mb: signed_mb(peak_d),
        peak_reuse_mb: signed_mb(peak_r),
        param_mb,
        grad_mb,
        workspace_mb,
        direct_convs,
    }
}

/// (parameters + velocities, gradients) in MB.
pub fn static_params(p: &IrProgram) -> (f32, f32) {
    let b: usize = p.params.iter().map(|&q| 4 * p.graph.param_info(q).shape.iter().product::<usize>()).sum();
    (mb(2 * b), mb(b))
}

/// The shared workspace holds the largest im2col buffer that fits the cap;
/// convolutions needing more run direct.
pub fn static_workspace(p: &IrProgram) -> (f32, Vec<String>) {
    let g = &p.graph;
    let names = Names::new([p.train.as_slice()]);
    let mut need: Vec<(usize, String)> = Vec::new();
    for s in p.train.iter().chain(&p.test) {
        let Some(t) = crate::ir::computed(s) else { continue };
        if !matches!(g.node(t), TNode::Prim { .. } | TNode::GradPrim { .. }) {
            continue;
        }
        if let Lowered::Kernel(k, args) = lower(g, t) {
            let shapes: Vec<&[usize]> = args.iter().map(|&a| g.shape(a)).collect();
            if let Some(e) = k.workspace_elems(&shapes) {
                need.push((4 * e, render_stmt(g, &names, s)));
            }
        }
    }
    let cap = p.workspace_cap.unwrap_or(usize::MAX);
    let ws = need.iter().map(|(b, _)| *b).filter(|&b| b <= cap).max().unwrap_or(0);
    let mut direct: Vec<String> = need.into_iter().filter(|(b, _)| *b > cap).map(|(_, s)| s).collect();
    direct.dedup();
    (mb(ws), direct)
}

const HEADER: &str = "IR expression                                 Dimensions      Current mem       Total  w/o dealloc";

/// Fixed-column table in the layout of the compiler's memory listing.
pub fn render_text(r: &MemoryReport) -> String {
    let mut s = String::new();
    s.push_str(HEADER);
    s.push('\n');
    s.push_str(&"-".repeat(HEADER.len()));
    s.push('\n');
    for row in &r.rows {
        let dims = row.dims.as_ref().map(|d| d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default();
        let nums = format!("{:>13.6}{:>12.6}{:>13.6}", row.delta_mb, row.total_dealloc_mb, row.total_reuse_mb);
        if row.stmt.len() > 45 {
            s.push_str(&row.stmt);
            s.push('\n');
            s.push_str(&format!("{:<46}{:<14}{nums}\n", "", dims));
        } else {
            s.push_str(&format!("{:<46}{:<14}{nums}\n", row.stmt, dims));
        }
    }
    s.push('\n');
    s.push_str(&format!("peak (dealloc)      {:.6}\n", r.peak_dealloc_mb));
    s.push_str(&format!("peak (reuse)        {:.6}\n", r.peak_reuse_mb));
    s.push_str(&format!("parameters          {:.6}\n", r.param_mb));
    s.push_str(&format!("gradients           {:.6}\n", r.grad_mb));
    s.push_str(&format!("workspace           {:.6}\n", r.workspace_mb));
    s.push_str(&format!("total (dealloc)     {:.6}\n", r.grand_total_dealloc_mb()));
    s.push_str(&format!("total (reuse)       {:.6}\n", r.grand_total_reuse_mb()));
    for c in &r.direct_convs {
        s.push_str(&format!("direct mode: {c}\n"));
    }
    s
}

pub fn render_csv(r: &MemoryReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["stmt", "dims", "delta_mb", "total_dealloc_mb", "total_reuse_mb"]);
    for row in &r.rows {
        let dims = row.dims.as_ref().map(|d| d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default();
        let _ = w.write_record([
            row.stmt.clone(),
            dims,
            format!("{:.6}", row.delta_mb),
            format!("{:.6}", row.total_dealloc_mb),
            format!("{:.6}", row.total_reuse_mb),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
