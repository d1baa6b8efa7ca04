//! MNIST-style datasets in the IDX container.
//!
//! An IDX file starts with two zero bytes, a type code (`0x08` for unsigned
//! bytes) and the rank, followed by `rank` big-endian `u32` extents and the
//! payload. Files may be gzip-compressed; compression is detected from the
//! first two bytes rather than the file name.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use morpho_core::{Rng, Tensor};

use crate::error::{io_err, Result, TrainError};

pub const CLASSES: usize = 10;

const UNSIGNED_BYTE: u8 = 0x08;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxHeader {
    pub type_code: u8,
    pub dims: Vec<usize>,
}

impl IdxHeader {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn payload_len(&self) -> usize {
        self.dims.iter().product()
    }

    fn encoded_len(&self) -> usize {
        4 + 4 * self.rank()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdxKind {
    Images,
    Labels,
}

impl IdxKind {
    fn rank(self) -> usize {
        match self {
            IdxKind::Images => 3,
            IdxKind::Labels => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    /// `[count, height, width]`, scaled into `[0, 1]`.
    Images(Tensor<f64>),
    Labels(Vec<usize>),
}

pub fn parse_header(bytes: &[u8]) -> Result<IdxHeader> {
    if bytes.len() < 4 {
        return Err(TrainError::Idx(format!("header needs 4 bytes, found {}", bytes.len())));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(TrainError::Idx(format!("bad magic {:02x?}", &bytes[..4])));
    }
    let (type_code, rank) = (bytes[2], bytes[3] as usize);
    if type_code != UNSIGNED_BYTE {
        return Err(TrainError::Idx(format!("type code {type_code:#04x} is not unsigned byte")));
    }
    let need = 4 + 4 * rank;
    if bytes.len() < need {
        return Err(TrainError::Idx(format!(
            "truncated header: missing {} of {need} bytes",
            need - bytes.len()
        )));
    }
    let dims = bytes[4..need]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    Ok(IdxHeader { type_code, dims })
}

fn decompress(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| TrainError::Idx(format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parse IDX bytes, optionally gzip-compressed.
pub fn parse_idx(raw: Vec<u8>, expect: IdxKind) -> Result<IdxData> {
    let bytes = decompress(raw)?;
    let header = parse_header(&bytes)?;
    if header.rank() != expect.rank() {
        return Err(TrainError::Idx(format!(
            "expected rank {} for {expect:?}, found rank {}",
            expect.rank(),
            header.rank()
        )));
    }
    let payload = &bytes[header.encoded_len()..];
    let want = header.payload_len();
    if payload.len() < want {
        return Err(TrainError::Idx(format!(
            "truncated payload: missing {} of {want} bytes",
            want - payload.len()
        )));
    }
    let payload = &payload[..want];
    Ok(match expect {
        IdxKind::Images => {
            let data = payload.iter().map(|&b| f64::from(b) / 255.0).collect();
            IdxData::Images(Tensor::new(header.dims, data)?)
        }
        IdxKind::Labels => IdxData::Labels(payload.iter().map(|&b| b as usize).collect()),
    })
}

pub fn load_idx(path: &Path, expect: IdxKind) -> Result<IdxData> {
    let raw = fs::read(path).map_err(io_err(path))?;
    parse_idx(raw, expect)
}

fn encode(dims: &[usize], payload: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = vec![0, 0, UNSIGNED_BYTE, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(payload);
    out
}

/// Images are quantized back to bytes by rounding `255 · v`.
pub fn images_to_idx(images: &Tensor<f64>) -> Vec<u8> {
    encode(images.shape(), images.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8))
}

pub fn labels_to_idx(labels: &[usize]) -> Vec<u8> {
    encode(&[labels.len()], labels.iter().map(|&l| l as u8))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Tensor<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Tensor<f64>, labels: Vec<usize>) -> Result<Self> {
        if images.rank() != 3 || images.shape()[0] != labels.len() {
            return Err(TrainError::Idx(format!(
                "{} labels for images of shape {:?}",
                labels.len(),
                images.shape()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= CLASSES) {
            return Err(TrainError::Idx(format!("label {l} outside 0..{CLASSES}")));
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(TrainError::Idx("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { images, labels })
    }

    pub fn load(images: &Path, labels: &Path) -> Result<Self> {
        let IdxData::Images(x) = load_idx(images, IdxKind::Images)? else {
            unreachable!("image rank checked by the parser")
        };
        let IdxData::Labels(y) = load_idx(labels, IdxKind::Labels)? else {
            unreachable!("label rank checked by the parser")
        };
        Self::new(x, y)
    }

    /// The standard file names `{train,t10k}-{images-idx3,labels-idx1}-ubyte`
    /// inside `dir`, with or without a `.gz` suffix.
    pub fn load_split(dir: &Path, train: bool) -> Result<Self> {
        let prefix = if train { "train" } else { "t10k" };
        let find = |stem: &str| {
            let plain = dir.join(format!("{prefix}-{stem}-ubyte"));
            let gz = dir.join(format!("{prefix}-{stem}-ubyte.gz"));
            if !plain.exists() && gz.exists() {
                gz
            } else {
                plain
            }
        };
        Self::load(&find("images-idx3"), &find("labels-idx1"))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor<f64> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.images.shape()[1], self.images.shape()[2])
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut counts = [0; CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Images `[n, 1, h, w]` and labels for the given sample indices.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f64>, Vec<usize>) {
        let (h, w) = self.image_shape();
        let area = h * w;
        let mut data = Vec::with_capacity(indices.len() * area);
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * area..(i + 1) * area]);
        }
        let images = Tensor::new(vec![indices.len(), 1, h, w], data).expect("gathered shape");
        (images, indices.iter().map(|&i| self.labels[i]).collect())
    }

    fn select(&self, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        let (images, labels) = self.gather(&indices);
        let (h, w) = self.image_shape();
        let images = images.reshape(&[indices.len(), h, w]).expect("same volume");
        Self { images, labels }
    }

    /// Deterministic sample of `n` items, in original order. A stratified
    /// sample keeps each class within one item of its proportional share.
    pub fn subset(&self, n: usize, rng: &mut Rng, stratified: bool) -> Result<Self> {
        if n > self.len() {
            return Err(TrainError::InvalidConfig(format!(
                "cannot take {n} samples from a dataset of {}",
                self.len()
            )));
        }
        if n == self.len() {
            return Ok(self.clone());
        }
        if !stratified {
            let mut order = rng.permutation(self.len());
            order.truncate(n);
            return Ok(self.select(order));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASSES];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let quotas = largest_remainder(&self.class_counts(), n);
        let mut chosen = Vec::with_capacity(n);
        for (members, quota) in by_class.iter_mut().zip(quotas) {
            rng.shuffle(members);
            chosen.extend_from_slice(&members[..quota]);
        }
        Ok(self.select(chosen))
    }

    /// Index partition of one epoch. The last batch may be short.
    pub fn batch_indices(&self, batch_size: usize, rng: &mut Rng, shuffle: bool) -> Vec<Vec<usize>> {
        assert!(batch_size >= 1, "batch size must be positive");
        let order = if shuffle {
            rng.permutation(self.len())
        } else {
            (0..self.len()).collect()
        };
        order.chunks(batch_size).map(<[usize]>::to_vec).collect()
    }

    /// One epoch of `(images [b, 1, h, w], labels)` batches.
    pub fn batches<'a>(
        &'a self,
        batch_size: usize,
        rng: &mut Rng,
        shuffle: bool,
    ) -> impl Iterator<Item = (Tensor<f64>, Vec<usize>)> + 'a {
        self.batch_indices(batch_size, rng, shuffle)
            .into_iter()
            .map(move |idx| self.gather(&idx))
    }

    pub fn write_idx(&self, images: &Path, labels: &Path) -> Result<()> {
        for (path, bytes) in [(images, images_to_idx(&self.images)), (labels, labels_to_idx(&self.labels))] {
            let mut f = fs::File::create(path).map_err(io_err(path))?;
            f.write_all(&bytes).map_err(io_err(path))?;
        }
        Ok(())
    }
}

/// Split `n` across classes proportionally to `counts`, giving leftover
/// units to the largest fractional parts (lowest class first on ties).
fn largest_remainder(counts: &[usize], n: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * n / total).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(counts[c] * n % total), c));
    let left = n - quotas.iter().sum::<usize>();
    for &c in order.iter().take(left) {
        quotas[c] += 1;
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(per_class: &[usize]) -> Dataset {
        let labels: Vec<usize> = per_class.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat(c).take(k)).collect();
        let n = labels.len();
        let data = (0..n * 4).map(|k| (k % 256) as f64 / 255.0).collect();
        Dataset::new(Tensor::new(vec![n, 2, 2], data).unwrap(), labels).unwrap()
    }

    #[test]
    fn header_dims_are_big_endian() {
        let bytes = encode(&[60000, 28, 28], std::iter::empty());
        let h = parse_header(&bytes).unwrap();
        assert_eq!(h.dims, vec![60000, 28, 28]);
        let bytes = encode(&[10000], std::iter::empty());
        assert_eq!(parse_header(&bytes).unwrap().dims, vec![10000]);
    }

    #[test]
    fn truncated_payload_names_missing_bytes() {
        let mut bytes = encode(&[2, 2, 2], (0..8).map(|v| v as u8));
        bytes.truncate(bytes.len() - 3);
        let err = parse_idx(bytes, IdxKind::Images).unwrap_err().to_string();
        assert!(err.contains("missing 3 of 8 bytes"), "{err}");
    }

    #[test]
    fn rank_and_magic_are_checked() {
        let labels = labels_to_idx(&[1, 2, 3]);
        assert!(parse_idx(labels.clone(), IdxKind::Images).is_err());
        let mut bad = labels;
        bad[0] = 1;
        assert!(parse_idx(bad, IdxKind::Labels).is_err());
    }

    #[test]
    fn gzip_is_detected_by_content() {
        let plain = labels_to_idx(&[4, 0, 9]);
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&plain).unwrap();
        let gz = enc.finish().unwrap();
        assert_eq!(parse_idx(gz, IdxKind::Labels).unwrap(), IdxData::Labels(vec![4, 0, 9]));
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = synthetic(&[3; 10]);
        let IdxData::Images(x) = parse_idx(images_to_idx(ds.images()), IdxKind::Images).unwrap() else { panic!() };
        let IdxData::Labels(y) = parse_idx(labels_to_idx(ds.labels()), IdxKind::Labels).unwrap() else { panic!() };
        assert_eq!(Dataset::new(x, y).unwrap(), ds);
    }

    #[test]
    fn stratified_subset_is_balanced_and_deterministic() {
        let ds = synthetic(&[200; 10]);
        let a = ds.subset(1000, &mut Rng::new(5), true).unwrap();
        assert_eq!(a.class_counts(), [100; 10]);
        assert_eq!(a, ds.subset(1000, &mut Rng::new(5), true).unwrap());
        assert_ne!(a, ds.subset(1000, &mut Rng::new(6), true).unwrap());
        assert_eq!(ds.subset(ds.len(), &mut Rng::new(5), true).unwrap(), ds);
        assert!(ds.subset(ds.len() + 1, &mut Rng::new(5), false).is_err());
    }

    #[test]
    fn stratified_shares_stay_within_one() {
        let ds = synthetic(&[7, 30, 11, 50, 2, 9, 13, 40, 21, 17]);
        for n in [1, 13, 50, 99, 150] {
            let s = ds.subset(n, &mut Rng::new(n as u64), true).unwrap();
            assert_eq!(s.len(), n);
            for (c, &k) in s.class_counts().iter().enumerate() {
                let share = ds.class_counts()[c] as f64 * n as f64 / ds.len() as f64;
                assert!((k as f64 - share).abs() < 1.0 + 1e-9, "class {c}: {k} vs {share}");
            }
        }
    }

    #[test]
    fn batches_partition_the_epoch() {
        let ds = synthetic(&[100; 10]);
        let sizes: Vec<usize> = ds.batch_indices(256, &mut Rng::new(0), true).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![256, 256, 256, 232]);
        let plain = ds.batch_indices(256, &mut Rng::new(0), false);
        assert_eq!(plain.concat(), (0..1000).collect::<Vec<_>>());

        let mut rng = Rng::new(9);
        let e1 = ds.batch_indices(100, &mut rng, true).concat();
        let e2 = ds.batch_indices(100, &mut rng, true).concat();
        assert_ne!(e1, e2);
        let mut again = Rng::new(9);
        assert_eq!(ds.batch_indices(100, &mut again, true).concat(), e1);
        assert_eq!(ds.batch_indices(100, &mut again, true).concat(), e2);
    }

    #[test]
    fn gathered_batches_have_a_channel_axis() {
        let ds = synthetic(&[2; 10]);
        let (x, y) = ds.batches(8, &mut Rng::new(0), false).next().unwrap();
        assert_eq!(x.shape(), &[8, 1, 2, 2]);
        assert_eq!(y, ds.labels()[..8]);
    }
}
