//! Labelled acceleration dataset: generation, road-disjoint split, window
//! augmentation, additive noise, kinematic reconstruction and persistence.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::road::{self, RoadClass};
use crate::seed::{self, Rng, Stream};
use crate::sim::{self, QcmParams, TargetParams, MASS_MAX, MASS_MIN};

/// Width of the network input window.
pub const WINDOW_LEN: usize = 500;
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of road profiles `L_r`.
    pub roads: usize,
    /// Passenger masses per road `L_m`.
    pub masses: usize,
    /// Samples per trace `N`.
    pub n: usize,
    pub h: f64,
    /// Sine count `M` of the road model.
    pub frequencies: usize,
    pub velocity: f64,
    /// Roads `1..=train_roads` form the training split.
    pub train_roads: usize,
    pub master_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            roads: 100,
            masses: 100,
            n: sim::DEFAULT_STEPS,
            h: sim::DEFAULT_STEP,
            frequencies: road::DEFAULT_FREQUENCIES,
            velocity: road::DEFAULT_VELOCITY,
            train_roads: 80,
            master_seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roads < 1 || self.masses < 1 {
            return Err(Error::invalid("dataset needs at least one road and one mass"));
        }
        if self.n < 1 {
            return Err(Error::invalid("traces need N >= 1"));
        }
        if !(self.h > 0.0) {
            return Err(Error::invalid(format!("step width must be positive, got {}", self.h)));
        }
        if self.train_roads > self.roads {
            return Err(Error::invalid(format!(
                "train road count {} exceeds road count {}",
                self.train_roads, self.roads
            )));
        }
        road::build_grid(self.frequencies)?;
        if !(self.velocity > 0.0) {
            return Err(Error::invalid(format!("velocity must be positive, got {}", self.velocity)));
        }
        Ok(())
    }
}

/// Identity of one road realisation; enough to regenerate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadRecord {
    /// 1-based road index `j`.
    pub index: usize,
    pub class: RoadClass,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// 1-based road index `j`.
    pub road_index: usize,
    /// 1-based mass index `i`.
    pub mass_index: usize,
    pub mass: u32,
    pub road_class: RoadClass,
    pub road_seed: u64,
    pub z_ddot: Vec<f64>,
    pub y_ddot: Vec<f64>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.z_ddot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_ddot.is_empty()
    }

    pub fn params(&self) -> QcmParams {
        QcmParams::with_passenger_mass(f64::from(self.mass))
    }

    pub fn target(&self) -> TargetParams {
        sim::true_parameters(&self.params())
    }

    /// Stable identifier, independent of position in any view.
    pub fn key(&self) -> [u64; 2] {
        [self.road_index as u64, self.mass_index as u64]
    }

    pub fn file_name(&self) -> String {
        format!("sample_{}_{}.f64", self.road_index, self.mass_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GenConfig,
    pub roads: Vec<RoadRecord>,
    /// Ordered by road index, then mass index.
    pub samples: Vec<Sample>,
}

/// Draws the class and phase seed of road `j`.
pub fn road_record(master_seed: u64, index: usize) -> RoadRecord {
    let mut rng = seed::derived_rng(master_seed, Stream::Road, &[index as u64, 0]);
    let class = RoadClass::ALL[rng.random_range(0..RoadClass::ALL.len())];
    let seed = seed::derive(master_seed, Stream::Road, &[index as u64, 1]);
    RoadRecord { index, class, seed }
}

/// Passenger mass of sample `(j, i)`, uniform on `{50, ..., 200}`.
pub fn sample_mass(master_seed: u64, road_index: usize, mass_index: usize) -> u32 {
    let mut rng =
        seed::derived_rng(master_seed, Stream::Mass, &[road_index as u64, mass_index as u64]);
    rng.random_range(MASS_MIN..=MASS_MAX)
}

/// Simulates one sample from its recorded road identity and mass.
pub fn simulate_sample(
    config: &GenConfig,
    road: &RoadRecord,
    mass_index: usize,
    mass: u32,
    road_samples: &[f64],
) -> Result<Sample> {
    let params = QcmParams::with_passenger_mass(f64::from(mass));
    let trace = sim::simulate_samples(&params, road_samples.to_vec(), config.h).map_err(|e| match e {
        Error::Diverged { step } => Error::SampleDiverged { road: road.index, mass: mass_index, step },
        other => other,
    })?;
    Ok(Sample {
        road_index: road.index,
        mass_index,
        mass,
        road_class: road.class,
        road_seed: road.seed,
        z_ddot: trace.z_ddot,
        y_ddot: trace.y_ddot,
    })
}

fn sample_road(config: &GenConfig, record: &RoadRecord) -> Result<Vec<f64>> {
    let profile = road::generate_road(record.class, config.frequencies, config.velocity, record.seed)?;
    Ok(profile.sample(config.h, config.n))
}

/// Regenerates a single sample from the dataset configuration alone.
pub fn regenerate_sample(config: &GenConfig, record: &RoadRecord, mass_index: usize, mass: u32) -> Result<Sample> {
    let road = sample_road(config, record)?;
    simulate_sample(config, record, mass_index, mass, &road)
}

pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let roads: Vec<RoadRecord> = (1..=config.roads).map(|j| road_record(config.master_seed, j)).collect();
    let per_road: Vec<Vec<Sample>> = roads
        .par_iter()
        .map(|record| {
            let samples = sample_road(config, record)?;
            (1..=config.masses)
                .into_par_iter()
                .map(|i| {
                    let mass = sample_mass(config.master_seed, record.index, i);
                    simulate_sample(config, record, i, mass, &samples)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { config: config.clone(), roads, samples: per_road.into_iter().flatten().collect() })
}

/// Borrowed subset of a dataset's samples.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    pub dataset: &'a Dataset,
    pub indices: &'a [usize],
}

impl<'a> DatasetView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, k: usize) -> &'a Sample {
        &self.dataset.samples[self.indices[k]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a Sample> + 'a {
        let samples = &self.dataset.samples;
        self.indices.iter().map(move |&i| &samples[i])
    }
}

/// Sample positions of the train and test splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_roads: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn train_view<'a>(&'a self, dataset: &'a Dataset) -> DatasetView<'a> {
        DatasetView { dataset, indices: &self.train }
    }

    pub fn test_view<'a>(&'a self, dataset: &'a Dataset) -> DatasetView<'a> {
        DatasetView { dataset, indices: &self.test }
    }
}

/// Splits by road identity: roads `1..=train_road_count` train, the rest test.
pub fn split(dataset: &Dataset, train_road_count: usize) -> Result<Split> {
    let roads = dataset.config.roads;
    if train_road_count == 0 || train_road_count >= roads {
        return Err(Error::invalid(format!(
            "train road count must lie in 1..{roads}, got {train_road_count}"
        )));
    }
    let (train, test) =
        (0..dataset.samples.len()).partition(|&k| dataset.samples[k].road_index <= train_road_count);
    Ok(Split { train_roads: train_road_count, train, test })
}

/// Contiguous `WINDOW_LEN`-row excerpt, rows stored as `[z_ddot, y_ddot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: usize,
    pub values: Vec<f64>,
}

impl Window {
    pub fn rows(&self) -> usize {
        self.values.len() / 2
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.rows()
    }
}

pub fn window_at(sample: &Sample, start: usize) -> Result<Window> {
    window_with_len(sample, start, WINDOW_LEN)
}

/// Window of arbitrary length, for reduced architectures.
pub fn window_with_len(sample: &Sample, start: usize, len: usize) -> Result<Window> {
    let n = sample.len();
    if len == 0 || n < len {
        return Err(Error::invalid(format!("sample length {n} is shorter than the window {len}")));
    }
    if start > n - len {
        return Err(Error::invalid(format!("window start {start} exceeds {}", n - len)));
    }
    let values = sample.z_ddot[start..start + len]
        .iter()
        .zip(&sample.y_ddot[start..start + len])
        .flat_map(|(&z, &y)| [z, y])
        .collect();
    Ok(Window { start, values })
}

/// Draws a start index uniformly from `0..=N-WINDOW_LEN`.
pub fn draw_window_start(n: usize, rng: &mut Rng) -> Result<usize> {
    draw_start_for_len(n, WINDOW_LEN, rng)
}

pub fn draw_start_for_len(n: usize, len: usize, rng: &mut Rng) -> Result<usize> {
    if len == 0 || n < len {
        return Err(Error::invalid(format!("sample length {n} is shorter than the window {len}")));
    }
    Ok(rng.random_range(0..=n - len))
}

pub fn sample_window(sample: &Sample, rng: &mut Rng) -> Result<Window> {
    let start = draw_window_start(sample.len(), rng)?;
    window_at(sample, start)
}

/// Adds i.i.d. `N(0, sigma²)` noise to both channels; `sigma` is the standard
/// deviation.
pub fn add_noise(sample: &Sample, sigma: f64, rng: &mut Rng) -> Result<Sample> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let mut noisy = sample.clone();
    if sigma == 0.0 {
        return Ok(noisy);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    for a in noisy.z_ddot.iter_mut() {
        *a += normal.sample(rng);
    }
    for a in noisy.y_ddot.iter_mut() {
        *a += normal.sample(rng);
    }
    Ok(noisy)
}

/// Velocities and displacements integrated from recorded accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub z_dot: Vec<f64>,
    pub y_dot: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

fn integrate_channel(acc: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = acc.len();
    let mut vel = vec![0.0; n];
    let mut pos = vec![0.0; n];
    for k in 1..n {
        vel[k] = vel[k - 1] + h * acc[k - 1];
        pos[k] = pos[k - 1] + h * vel[k];
    }
    (vel, pos)
}

/// Semi-implicit Euler reconstruction from rest: velocity from the previous
/// acceleration, displacement from the new velocity.
pub fn reconstruct_kinematics(z_ddot: &[f64], y_ddot: &[f64], h: f64) -> Result<Kinematics> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step width must be positive, got {h}")));
    }
    if z_ddot.len() != y_ddot.len() {
        return Err(Error::Shape(format!(
            "channel lengths differ: {} vs {}",
            z_ddot.len(),
            y_ddot.len()
        )));
    }
    let (z_dot, z) = integrate_channel(z_ddot, h);
    let (y_dot, y) = integrate_channel(y_ddot, h);
    Ok(Kinematics { z_dot, y_dot, z, y })
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub road: usize,
    pub mass_index: usize,
    pub m3: u32,
    pub file: String,
    pub sha256: String,
}

/// On-disk description of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    #[serde(rename = "M")]
    pub frequencies: usize,
    pub v: f64,
    #[serde(rename = "L_r")]
    pub roads: usize,
    #[serde(rename = "L_m")]
    pub masses: usize,
    pub train_road_count: usize,
    pub master_seed: u64,
    pub road_profiles: Vec<RoadRecord>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn config(&self) -> GenConfig {
        GenConfig {
            roads: self.roads,
            masses: self.masses,
            n: self.n,
            h: self.h,
            frequencies: self.frequencies,
            velocity: self.v,
            train_roads: self.train_road_count,
            master_seed: self.master_seed,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_sample(sample: &Sample) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16 * sample.len());
    for v in sample.z_ddot.iter().chain(&sample.y_ddot) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub(crate) fn decode_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.json` plus one `sample_{j}_{i}.f64` per sample. Returns the
/// written paths.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(dataset.samples.len() + 1);
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for sample in &dataset.samples {
        let bytes = encode_sample(sample);
        let file = sample.file_name();
        let path = dir.join(&file);
        write_file(&path, &bytes)?;
        entries.push(SampleEntry {
            road: sample.road_index,
            mass_index: sample.mass_index,
            m3: sample.mass,
            file,
            sha256: sha256_hex(&bytes),
        });
        written.push(path);
    }
    let c = &dataset.config;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        n: c.n,
        h: c.h,
        frequencies: c.frequencies,
        v: c.velocity,
        roads: c.roads,
        masses: c.masses,
        train_road_count: c.train_roads,
        master_seed: c.master_seed,
        road_profiles: dataset.roads.clone(),
        samples: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Manifest { path: path.clone(), source: e })?;
    write_file(&path, &json)?;
    written.push(path);
    Ok(written)
}

/// Reads and validates only the manifest; sample files are not touched.
pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Manifest { path: path.clone(), source: e })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Version { path, found: manifest.format_version, expected: FORMAT_VERSION });
    }
    let expected = manifest.roads * manifest.masses;
    if manifest.samples.len() != expected || manifest.road_profiles.len() != manifest.roads {
        return Err(Error::Corrupt {
            path,
            reason: format!(
                "manifest lists {} samples / {} roads, configuration implies {expected} / {}",
                manifest.samples.len(),
                manifest.road_profiles.len(),
                manifest.roads
            ),
        });
    }
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = load_manifest(dir)?;
    let n = manifest.n;
    let samples = manifest
        .samples
        .par_iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let ident = format!("sample (road {}, mass {})", entry.road, entry.mass_index);
            if bytes.len() != 16 * n {
                return Err(Error::Corrupt {
                    path,
                    reason: format!("{ident}: expected {} bytes, found {}", 16 * n, bytes.len()),
                });
            }
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::Corrupt { path, reason: format!("{ident}: content hash mismatch") });
            }
            let record = manifest
                .road_profiles
                .iter()
                .find(|r| r.index == entry.road)
                .ok_or_else(|| Error::Corrupt {
                    path: path.clone(),
                    reason: format!("{ident}: unknown road index"),
                })?;
            let mut values = decode_f64s(&bytes);
            let y_ddot = values.split_off(n);
            Ok(Sample {
                road_index: entry.road,
                mass_index: entry.mass_index,
                mass: entry.m3,
                road_class: record.class,
                road_seed: record.seed,
                z_ddot: values,
                y_ddot,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { config: manifest.config(), roads: manifest.road_profiles, samples })
}
