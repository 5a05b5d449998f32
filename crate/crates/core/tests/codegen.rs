use std::path::Path;
use tensorc::codegen::{emit, file_name, type_name};
use tensorc::compile::{compile, Options};
use tensorc::netspec::parse_netspec;
use tensorc_runtime::PoolMode;

fn lenet_source() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../examples/nets/lenet.net");
    std::fs::read_to_string(p).unwrap()
}

fn emit_lenet(mode: PoolMode) -> (String, tensorc::compile::Compiled) {
    let c = compile(&parse_netspec(&lenet_source()).unwrap(), &Options { mode, workspace_cap: None }).unwrap();
    (emit(&c.ir), c)
}

#[test]
fn emission_is_deterministic() {
    let (a, _) = emit_lenet(PoolMode::Reuse);
    let (b, _) = emit_lenet(PoolMode::Reuse);
    assert_eq!(a, b);
}

#[test]
fn mode_is_baked_in() {
    let (r, _) = emit_lenet(PoolMode::Reuse);
    let (d, _) = emit_lenet(PoolMode::Dealloc);
    assert!(r.contains("pub const MODE: PoolMode = PoolMode::Reuse;"));
    assert!(d.contains("pub const MODE: PoolMode = PoolMode::Dealloc;"));
    assert!(d.matches("ctx.release(").count() > 0);
}

#[test]
fn names_follow_solver() {
    let (text, c) = emit_lenet(PoolMode::Reuse);
    assert_eq!(file_name(&c.ir), "lenet.gen.rs");
    assert_eq!(type_name(&c.ir), "Lenet");
    assert!(text.contains("pub struct Lenet {"));
}

#[test]
fn every_statement_is_annotated() {
    let (text, c) = emit_lenet(PoolMode::Reuse);
    let comments = text.lines().filter(|l| l.trim_start().starts_with("// ")).count();
    assert!(comments >= c.ir.train.len() + c.ir.test.len());
}

#[test]
fn every_parameter_is_declared_once() {
    let (text, c) = emit_lenet(PoolMode::Reuse);
    for p in &c.ir.params {
        let name = &c.ir.graph.params[p.0 as usize].name;
        assert_eq!(text.matches(&format!("(\"{name}\"")).count(), 1, "{name}");
    }
}
