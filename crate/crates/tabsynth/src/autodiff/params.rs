//! Named parameter collections with gradients, optimizer state and
//! binary snapshot IO.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use super::AdError;

const SNAPSHOT_MAGIC: &[u8; 4] = b"TSNP";
const SNAPSHOT_VERSION: u32 = 1;

/// One named tensor: value, gradient accumulator and a trainable flag.
///
/// Non-trainable entries (running statistics, fixed initial states) travel
/// with the set and are saved in snapshots, but optimizer steps and
/// gradient clipping leave them untouched.
#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

#[derive(Clone, Debug)]
enum OptState {
    Empty,
    Adam { m: Vec<Tensor>, v: Vec<Tensor>, t: u64 },
    RmsProp { acc: Vec<Tensor> },
}

/// Ordered collection of named parameters.
///
/// Gradients accumulate across backward passes until [`ParamSet::zero_grads`]
/// is called. Optimizer state lives here so that a `ParamSet` is everything a
/// training step needs to resume.
#[derive(Clone, Debug)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
    index: BTreeMap<String, usize>,
    opt: OptState,
    grads_ready: bool,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            index: BTreeMap::new(),
            opt: OptState::Empty,
            grads_ready: false,
        }
    }

    /// Add a tensor under a unique name; the gradient starts at zero.
    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<(), AdError> {
        if self.index.contains_key(name) {
            return Err(AdError::DuplicateParam(name.to_string()));
        }
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry { name: name.to_string(), value, grad, trainable });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all entries.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn index_of(&self, name: &str) -> Result<usize, AdError> {
        self.index.get(name).copied().ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry {
        &self.entries[idx]
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, AdError> {
        Ok(&self.entries[self.index_of(name)?].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, AdError> {
        let i = self.index_of(name)?;
        Ok(&mut self.entries[i].value)
    }

    pub fn grad_of(&self, name: &str) -> Result<&Tensor, AdError> {
        Ok(&self.entries[self.index_of(name)?].grad)
    }

    /// Reset every gradient to zero and clear the "gradients populated" flag.
    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
        self.grads_ready = false;
    }

    /// Add `grad` into the accumulator of entry `idx` and mark gradients as
    /// populated. Called by the graph at the end of a backward pass.
    pub(crate) fn accumulate_grad(&mut self, idx: usize, grad: &Tensor) {
        self.entries[idx].grad.add_assign(grad);
        self.grads_ready = true;
    }

    /// Inject a value directly into a gradient accumulator (used for
    /// per-example gradient perturbation) and mark gradients as populated.
    pub fn add_to_grad(&mut self, idx: usize, coord: usize, delta: f64) {
        self.entries[idx].grad.data_mut()[coord] += delta;
        self.grads_ready = true;
    }

    /// Multiply every trainable gradient by `s`.
    pub fn scale_grads(&mut self, s: f64) {
        for e in &mut self.entries {
            if e.trainable {
                e.grad.scale(s);
            }
        }
    }

    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    fn ensure_adam(&mut self) -> Result<(), AdError> {
        if !matches!(self.opt, OptState::Adam { .. }) {
            let m = self.entries.iter().map(|e| Tensor::zeros(e.value.rows(), e.value.cols()));
            let v = self.entries.iter().map(|e| Tensor::zeros(e.value.rows(), e.value.cols()));
            self.opt = OptState::Adam { m: m.collect(), v: v.collect(), t: 0 };
        }
        Ok(())
    }

    fn ensure_rmsprop(&mut self) -> Result<(), AdError> {
        if !matches!(self.opt, OptState::RmsProp { .. }) {
            let acc = self.entries.iter().map(|e| Tensor::zeros(e.value.rows(), e.value.cols()));
            self.opt = OptState::RmsProp { acc: acc.collect() };
        }
        Ok(())
    }

    /// One Adam step over the trainable entries: decay rates 0.9/0.999,
    /// bias-corrected moments, epsilon 1e-8. Gradients must have been
    /// populated since the last `zero_grads`.
    pub fn adam_step(&mut self, lr: f64) -> Result<(), AdError> {
        if !self.grads_ready {
            return Err(AdError::MissingGrads);
        }
        self.ensure_adam()?;
        let OptState::Adam { m, v, t } = &mut self.opt else { unreachable!() };
        *t += 1;
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let bc1 = 1.0 - b1.powi(*t as i32);
        let bc2 = 1.0 - b2.powi(*t as i32);
        for (e, (mi, vi)) in self.entries.iter_mut().zip(m.iter_mut().zip(v.iter_mut())) {
            if !e.trainable {
                continue;
            }
            let g = e.grad.data();
            let theta = e.value.data_mut();
            let md = mi.data_mut();
            let vd = vi.data_mut();
            for j in 0..g.len() {
                md[j] = b1 * md[j] + (1.0 - b1) * g[j];
                vd[j] = b2 * vd[j] + (1.0 - b2) * g[j] * g[j];
                let mhat = md[j] / bc1;
                let vhat = vd[j] / bc2;
                theta[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// One RMSProp step over the trainable entries: squared-gradient
    /// accumulator with decay 0.99, epsilon 1e-8.
    pub fn rmsprop_step(&mut self, lr: f64) -> Result<(), AdError> {
        if !self.grads_ready {
            return Err(AdError::MissingGrads);
        }
        self.ensure_rmsprop()?;
        let OptState::RmsProp { acc } = &mut self.opt else { unreachable!() };
        for (e, ai) in self.entries.iter_mut().zip(acc.iter_mut()) {
            if !e.trainable {
                continue;
            }
            let g = e.grad.data();
            let theta = e.value.data_mut();
            let ad = ai.data_mut();
            for j in 0..g.len() {
                ad[j] = 0.99 * ad[j] + 0.01 * g[j] * g[j];
                theta[j] -= lr * g[j] / (ad[j].sqrt() + 1e-8);
            }
        }
        Ok(())
    }

    /// Clamp every trainable value into `[-bound, bound]`.
    pub fn clip(&mut self, bound: f64) {
        for e in &mut self.entries {
            if e.trainable {
                for v in e.value.data_mut() {
                    *v = v.clamp(-bound, bound);
                }
            }
        }
    }

    /// Largest absolute trainable value (for clip-invariant checks).
    pub fn max_abs_trainable(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .flat_map(|e| e.value.data())
            .fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Write values to a binary snapshot: a header with names, shapes and
    /// trainable flags followed by all values as little-endian `f32`.
    /// Optimizer state and gradients are not persisted.
    pub fn save_snapshot(&self, path: &Path) -> Result<(), AdError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            let name = e.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(e.value.rows() as u32).to_le_bytes())?;
            w.write_all(&(e.value.cols() as u32).to_le_bytes())?;
            w.write_all(&[e.trainable as u8])?;
        }
        for e in &self.entries {
            for &v in e.value.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a snapshot written by [`ParamSet::save_snapshot`]. Gradients are
    /// zeroed and optimizer state starts empty.
    pub fn load_snapshot(path: &Path) -> Result<Self, AdError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(AdError::SnapshotFormat("bad magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(AdError::SnapshotFormat(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut headers = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| AdError::SnapshotFormat("non-utf8 parameter name".into()))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            headers.push((name, rows, cols, flag[0] != 0));
        }
        let mut set = ParamSet::new();
        for (name, rows, cols, trainable) in headers {
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 4];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f32::from_le_bytes(buf) as f64);
            }
            let t = Tensor::from_vec(rows, cols, data)?;
            set.insert(&name, t, trainable)?;
        }
        Ok(set)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, AdError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::scalar(v), true).unwrap();
        ps
    }

    #[test]
    fn step_without_grads_is_rejected() {
        let mut ps = single_param(0.5);
        assert!(matches!(ps.adam_step(0.01), Err(AdError::MissingGrads)));
        assert!(matches!(ps.rmsprop_step(0.01), Err(AdError::MissingGrads)));
    }

    #[test]
    fn adam_first_step_matches_closed_form() {
        let mut ps = single_param(0.5);
        ps.accumulate_grad(0, &Tensor::scalar(0.2));
        ps.adam_step(0.01).unwrap();
        // First step: bias correction cancels the decay exactly.
        let expected = 0.5 - 0.01 * 0.2 / (0.2f64 + 1e-8);
        assert!((ps.get("w").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_grad_leaves_params_unchanged() {
        let mut ps = single_param(1.25);
        ps.accumulate_grad(0, &Tensor::scalar(0.0));
        ps.adam_step(0.01).unwrap();
        assert_eq!(ps.get("w").unwrap().item(), 1.25);
    }

    #[test]
    fn rmsprop_first_step_matches_closed_form() {
        let mut ps = single_param(-0.3);
        ps.accumulate_grad(0, &Tensor::scalar(0.5));
        ps.rmsprop_step(5e-5).unwrap();
        let acc = 0.01 * 0.5f64 * 0.5;
        let expected = -0.3 - 5e-5 * 0.5 / (acc.sqrt() + 1e-8);
        assert!((ps.get("w").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_second_step_decays_accumulator() {
        let mut ps = single_param(0.0);
        ps.accumulate_grad(0, &Tensor::scalar(1.0));
        ps.rmsprop_step(0.001).unwrap();
        let theta1 = ps.get("w").unwrap().item();
        ps.zero_grads();
        ps.accumulate_grad(0, &Tensor::scalar(1.0));
        ps.rmsprop_step(0.001).unwrap();
        let acc1 = 0.01;
        let acc2 = 0.99 * acc1 + 0.01;
        let expected = theta1 - 0.001 / (f64::sqrt(acc2) + 1e-8);
        assert!((ps.get("w").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn clip_ignores_frozen_entries() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::row(&[3.0, -2.0, 0.005]), true).unwrap();
        ps.insert("stat", Tensor::row(&[9.0]), false).unwrap();
        ps.clip(0.01);
        assert_eq!(ps.get("w").unwrap().data(), &[0.01, -0.01, 0.005]);
        assert_eq!(ps.get("stat").unwrap().data(), &[9.0]);
    }

    #[test]
    fn zero_grads_resets_readiness() {
        let mut ps = single_param(0.0);
        ps.accumulate_grad(0, &Tensor::scalar(1.0));
        assert!(ps.grads_ready());
        ps.zero_grads();
        assert!(!ps.grads_ready());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut ps = single_param(0.0);
        assert!(matches!(
            ps.insert("w", Tensor::scalar(1.0), true),
            Err(AdError::DuplicateParam(_))
        ));
    }

    #[test]
    fn snapshot_round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.bin");
        let mut ps = ParamSet::new();
        ps.insert("a.w", Tensor::from_vec(2, 3, vec![0.1, -0.2, 0.3, 1.5, -2.5, 0.0]).unwrap(), true)
            .unwrap();
        ps.insert("a.stat", Tensor::row(&[0.25, 0.75]), false).unwrap();
        ps.save_snapshot(&path).unwrap();
        let back = ParamSet::load_snapshot(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.entries()[0].name, "a.w");
        assert!(back.entries()[0].trainable);
        assert!(!back.entries()[1].trainable);
        for (orig, loaded) in ps.entries().iter().zip(back.entries()) {
            assert_eq!(orig.value.shape(), loaded.value.shape());
            for (&a, &b) in orig.value.data().iter().zip(loaded.value.data()) {
                assert_eq!(a as f32 as f64, b);
            }
        }
    }
}
