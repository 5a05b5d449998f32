//! Training and testing loop shared by interpreted and generated programs.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{Batch, Dataset};
use crate::error::{Result, RuntimeError};
use crate::init::Init;
use crate::snapshot::{self, LoadReport};
use crate::tensor::{Element, Tensor};

const ITERATION_FILE: &str = "iteration";

/// Parameters with their velocity and gradient buffers, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T: Element> {
    pub names: Vec<String>,
    pub values: Vec<Tensor<T>>,
    pub velocities: Vec<Tensor<T>>,
    pub grads: Vec<Tensor<T>>,
}

impl<T: Element> Params<T> {
    /// Parameter `i` is drawn from stream `i + 1` of `seed`.
    pub fn init(specs: &[(String, Vec<usize>, Init)], seed: u64) -> Self {
        let values: Vec<Tensor<T>> = specs
            .iter()
            .enumerate()
            .map(|(i, (_, shape, init))| init.build(shape, seed, i as u64 + 1))
            .collect();
        Params {
            names: specs.iter().map(|s| s.0.clone()).collect(),
            velocities: values.iter().map(|v| Tensor::zeros(v.shape())).collect(),
            grads: values.iter().map(|v| Tensor::zeros(v.shape())).collect(),
            values,
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(T::zero());
        }
    }

    /// Writes values, velocities (`<name>_v`) and the iteration count.
    pub fn save(&self, dir: &Path, iteration: u64) -> Result<()> {
        let mut all: Vec<(String, &Tensor<T>)> = Vec::new();
        for (i, n) in self.names.iter().enumerate() {
            all.push((n.clone(), &self.values[i]));
            all.push((format!("{n}_v"), &self.velocities[i]));
        }
        let refs: Vec<(&str, &Tensor<T>)> = all.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        snapshot::save_snapshot(dir, &refs)?;
        let path = dir.join(ITERATION_FILE);
        fs::write(&path, format!("{iteration}\n")).map_err(|e| RuntimeError::io(path, e))
    }

    /// Loads whatever `dir` holds; missing files keep current values.
    /// Returns the report for parameter values and the saved iteration.
    pub fn load(&mut self, dir: &Path) -> Result<(LoadReport, u64)> {
        let names = self.names.clone();
        let mut slots: Vec<(&str, &mut Tensor<T>)> = names.iter().map(|n| n.as_str()).zip(self.values.iter_mut()).collect();
        let report = snapshot::load_snapshot(dir, &mut slots)?;
        let vnames: Vec<String> = names.iter().map(|n| format!("{n}_v")).collect();
        let mut vslots: Vec<(&str, &mut Tensor<T>)> = vnames
            .iter()
            .map(|n| n.as_str())
            .zip(self.velocities.iter_mut())
            .filter(|(n, _)| snapshot::file_for(dir, n).exists())
            .collect();
        snapshot::load_snapshot(dir, &mut vslots)?;
        let path = dir.join(ITERATION_FILE);
        let iteration = match fs::read_to_string(&path) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| RuntimeError::format(&path, format!("`{}` is not an iteration count", s.trim())))?,
            Err(_) => 0,
        };
        Ok((report, iteration))
    }
}

/// Outputs of one forward pass in test mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutput {
    pub loss: f64,
    pub precision: Option<f64>,
}

/// A compiled network.
pub trait Network<T: Element> {
    fn params(&self) -> &Params<T>;
    fn params_mut(&mut self) -> &mut Params<T>;
    /// Forward, backward and update on one batch; returns the loss.
    fn train_step(&mut self, batch: &Batch, iteration: u64) -> Result<f64>;
    fn test_step(&mut self, batch: &Batch) -> Result<TestOutput>;
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub iters: u64,
    pub batch: usize,
    pub test_iters: usize,
    /// Iterations between snapshots and tests; 0 means only at the end.
    pub snapshot_every: u64,
    pub snapshot_dir: Option<PathBuf>,
    /// Continue from the snapshot in `snapshot_dir` when one exists.
    pub resume: bool,
    pub loss_csv: Option<PathBuf>,
    pub verbose: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub start: u64,
    pub losses: Vec<(u64, f64)>,
    pub tests: Vec<(u64, TestOutput)>,
    pub resumed: Option<LoadReport>,
}

pub fn train<T: Element, N: Network<T>>(
    net: &mut N,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let mut report = TrainReport::default();
    if let (true, Some(dir)) = (opts.resume, &opts.snapshot_dir) {
        if snapshot::has_snapshot(dir) {
            let (loaded, it) = net.params_mut().load(dir)?;
            if opts.verbose {
                eprintln!("resuming at iteration {it} from {}", dir.display());
            }
            report.start = it;
            report.resumed = Some(loaded);
        }
    }
    let mut csv = match &opts.loss_csv {
        Some(path) => {
            let fresh = report.start == 0 || !path.exists();
            let mut f = OpenOptions::new()
                .create(true)
                .append(!fresh)
                .write(true)
                .truncate(fresh)
                .open(path)
                .map_err(|e| RuntimeError::io(path, e))?;
            if fresh {
                writeln!(f, "iteration,loss").map_err(|e| RuntimeError::io(path, e))?;
            }
            Some((path.clone(), f))
        }
        None => None,
    };
    for it in report.start..opts.iters {
        let batch = train_data.batch(it as usize, opts.batch);
        let loss = net.train_step(&batch, it)?;
        report.losses.push((it, loss));
        if let Some((path, f)) = &mut csv {
            writeln!(f, "{it},{loss}").map_err(|e| RuntimeError::io(path.clone(), e))?;
        }
        if opts.verbose {
            eprintln!("iteration {it}: loss {loss:.6}");
        }
        let done = it + 1;
        if opts.snapshot_every > 0 && done % opts.snapshot_every == 0 && done < opts.iters {
            checkpoint(net, test_data, opts, done, &mut report)?;
        }
    }
    let end = opts.iters.max(report.start);
    checkpoint(net, test_data, opts, end, &mut report)?;
    Ok(report)
}

fn checkpoint<T: Element, N: Network<T>>(
    net: &mut N,
    test_data: Option<&Dataset>,
    opts: &TrainOptions,
    iteration: u64,
    report: &mut TrainReport,
) -> Result<()> {
    if let Some(dir) = &opts.snapshot_dir {
        net.params().save(dir, iteration)?;
    }
    if let Some(data) = test_data {
        if opts.test_iters > 0 {
            let out = test(net, data, opts.batch, opts.test_iters)?;
            if opts.verbose {
                match out.precision {
                    Some(p) => eprintln!("test at {iteration}: loss {:.6} precision {p:.4}", out.loss),
                    None => eprintln!("test at {iteration}: loss {:.6}", out.loss),
                }
            }
            report.tests.push((iteration, out));
        }
    }
    Ok(())
}

/// Mean loss and precision over `iters` consecutive test batches.
pub fn test<T: Element, N: Network<T>>(net: &mut N, data: &Dataset, batch: usize, iters: usize) -> Result<TestOutput> {
    let (mut loss, mut prec, mut any_prec) = (0.0, 0.0, false);
    for i in 0..iters {
        let out = net.test_step(&data.batch(i, batch))?;
        loss += out.loss;
        if let Some(p) = out.precision {
            prec += p;
            any_prec = true;
        }
    }
    let n = iters.max(1) as f64;
    Ok(TestOutput {
        loss: loss / n,
        precision: any_prec.then_some(prec / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fits `w` to the mean of the batch images with plain gradient steps.
    struct Mean {
        params: Params<f64>,
    }

    impl Network<f64> for Mean {
        fn params(&self) -> &Params<f64> {
            &self.params
        }

        fn params_mut(&mut self) -> &mut Params<f64> {
            &mut self.params
        }

        fn train_step(&mut self, batch: &Batch, _: u64) -> Result<f64> {
            let m = batch.images.iter().map(|&v| v as f64).sum::<f64>() / batch.images.len() as f64;
            let w = &mut self.params.values[0].data_mut()[0];
            let loss = (*w - m) * (*w - m);
            *w -= 0.5 * (*w - m);
            Ok(loss)
        }

        fn test_step(&mut self, batch: &Batch) -> Result<TestOutput> {
            Ok(TestOutput {
                loss: batch.len() as f64,
                precision: Some(1.0),
            })
        }
    }

    fn net() -> Mean {
        Mean {
            params: Params::init(&[("w".into(), vec![1], Init::Const(0.0))], 1),
        }
    }

    #[test]
    fn resume_continues_from_saved_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let data = Dataset::synthetic(3, crate::data::Split::Train, 32, &[1, 2, 2], 2);
        let mut opts = TrainOptions {
            iters: 4,
            batch: 4,
            test_iters: 1,
            snapshot_dir: Some(dir.path().to_path_buf()),
            resume: true,
            loss_csv: Some(dir.path().join("m.loss.csv")),
            ..Default::default()
        };
        let mut a = net();
        let first = train(&mut a, &data, Some(&data), &opts).unwrap();
        assert_eq!(first.start, 0);
        assert_eq!(first.tests.len(), 1);
        opts.iters = 6;
        let mut b = net();
        let second = train(&mut b, &data, None, &opts).unwrap();
        assert_eq!(second.start, 4);
        assert_eq!(second.losses.len(), 2);
        let csv = std::fs::read_to_string(dir.path().join("m.loss.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6);

        let mut c = net();
        opts.snapshot_dir = None;
        let straight = train(&mut c, &data, None, &opts).unwrap();
        let (x, y) = (second.losses[1].1, straight.losses[5].1);
        assert!((x - y).abs() <= 1e-6 * y.abs().max(1e-12), "{x} vs {y}");
    }

    #[test]
    fn test_averages_batches() {
        let data = Dataset::synthetic(3, crate::data::Split::Test, 10, &[1, 1, 1], 2);
        let out = test(&mut net(), &data, 5, 3).unwrap();
        assert_eq!(out.loss, 5.0);
        assert_eq!(out.precision, Some(1.0));
    }
}
