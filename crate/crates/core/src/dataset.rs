//! Batch construction of projected segmentation datasets.
//!
//! Sources are `X.png` / `X_labels.png` pairs. Each pair is resized to the tangent
//! side `n`, projected at every configured φ (θ fixed), cropped to the top of the
//! projected region and resized to a square tile. Outputs land in
//! `<out>/phi_<k>pi16/{images,labels}/X.png` for sweeps and
//! `<out>/test/{images,labels}/…` for test sets, described by `<out>/manifest.jsonl`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::eval::default_classes;
use crate::geom::{EquirectSpec, SphereCoord};
use crate::par;
use crate::raster::{write_file, LabelMap, RasterImage, IGNORE_ID};
use crate::warp::{
    crop_to_upper_tile, resize_square, Interp, ProjectionJob, ProjectionPlan, Resample, WarpMode,
};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LABEL_SUFFIX: &str = "_labels";

/// Parameters shared by sweeps and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub phis: Vec<Angle>,
    pub theta: Angle,
    pub spec: EquirectSpec,
    /// Tangent image side; even values are bumped to the next odd size.
    pub n: usize,
    pub tile: usize,
    pub mode: WarpMode,
    pub interp: Interp,
    /// Recorded with the outputs; no step of the pipeline draws random numbers.
    pub seed: u64,
    /// Flip outputs vertically to study the lower region instead of the upper.
    pub mirror: bool,
    pub classes: Vec<String>,
}

/// φ = kπ/16 for k = 1..=8.
pub fn default_phis() -> Vec<Angle> {
    (1..=8).map(|k| Angle::pi_fraction(k, 16)).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            phis: default_phis(),
            theta: Angle::pi_fraction(0, 1),
            spec: EquirectSpec::new(1024, 512).expect("valid default raster"),
            n: 225,
            tile: 224,
            mode: WarpMode::Inverse,
            interp: Interp::Bilinear,
            seed: 0,
            mirror: false,
            classes: default_classes(),
        }
    }
}

impl SweepConfig {
    /// Default configuration with the single fully distorted φ = π/2.
    pub fn testset() -> Self {
        SweepConfig {
            phis: vec![Angle::pi_fraction(1, 2)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phis.is_empty() {
            return Err(Error::domain("phi list is empty"));
        }
        for phi in &self.phis {
            let r = phi.radians();
            if !(r > 0.0 && r <= std::f64::consts::FRAC_PI_2) {
                return Err(Error::domain(format!(
                    "phi {} outside (0, pi/2]",
                    phi.label()
                )));
            }
        }
        if self.tile < 32 {
            return Err(Error::domain(format!("tile {} is below 32", self.tile)));
        }
        if self.tile > self.spec.width().min(self.spec.height()) {
            return Err(Error::domain(format!(
                "tile {} does not fit a {}x{} raster",
                self.tile,
                self.spec.width(),
                self.spec.height()
            )));
        }
        if self.classes.is_empty() || self.classes.len() >= IGNORE_ID as usize {
            return Err(Error::domain("class list must hold 1..=254 entries"));
        }
        self.job(self.phis[0]).map(|_| ())
    }

    fn job(&self, phi: Angle) -> Result<ProjectionJob> {
        let tangent = SphereCoord::new(self.theta.radians(), phi.radians())?;
        ProjectionJob::new(tangent, self.spec, self.n, self.interp, self.mode)
    }
}

/// Source-id → target-id relabeling; ids missing from the table become ignore.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassMap {
    table: BTreeMap<u8, u8>,
}

impl ClassMap {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        ClassMap {
            table: pairs.into_iter().collect(),
        }
    }

    /// Parses `{"source_id": target_id, …}`.
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let raw: BTreeMap<String, u8> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut table = BTreeMap::new();
        for (k, v) in raw {
            let key: u8 = k
                .trim()
                .parse()
                .map_err(|_| format!("class id {k:?} is not in 0..=255"))?;
            table.insert(key, v);
        }
        Ok(ClassMap { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
            .map_err(|e| Error::domain(format!("class map {}: {e}", path.display())))
    }

    /// Lookup table for [`LabelMap::remap`]. Targets outside the declared classes map to ignore.
    pub fn lookup(&self, num_classes: usize) -> [u8; 256] {
        let mut lut = [IGNORE_ID; 256];
        for (&src, &dst) in &self.table {
            if (dst as usize) < num_classes {
                lut[src as usize] = dst;
            }
        }
        lut
    }
}

/// Identity over the declared classes, everything else to ignore.
fn identity_lookup(num_classes: usize) -> [u8; 256] {
    let mut lut = [IGNORE_ID; 256];
    for (i, slot) in lut.iter_mut().enumerate().take(num_classes) {
        *slot = i as u8;
    }
    lut
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePair {
    /// Output basename.
    pub name: String,
    /// Path recorded in the manifest.
    pub source: String,
    pub image: PathBuf,
    pub labels: PathBuf,
}

/// Inputs of a run, plus how many files could not be paired.
#[derive(Debug, Clone, Default)]
pub struct SourceSet {
    pub pairs: Vec<SourcePair>,
    pub unpaired: Vec<PathBuf>,
}

impl SourceSet {
    /// Pairs `X.png` with `X_labels.png` in `dir`, sorted by name.
    pub fn discover(dir: &Path) -> Result<Self> {
        let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut images = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for entry in read {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let Some(stem) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
            else {
                continue;
            };
            match stem.strip_suffix(LABEL_SUFFIX) {
                Some(base) => labels.insert(base.to_string(), path),
                None => images.insert(stem, path),
            };
        }
        let mut set = SourceSet::default();
        for (name, image) in images {
            match labels.remove(&name) {
                Some(lbl) => set.pairs.push(SourcePair {
                    source: image.file_name().unwrap().to_string_lossy().into_owned(),
                    name,
                    image,
                    labels: lbl,
                }),
                None => set.unpaired.push(image),
            }
        }
        set.unpaired.extend(labels.into_values());
        set.unpaired.sort();
        Ok(set)
    }

    /// Reads a JSON-lines listing of `{"image": …, "labels": …}` objects; relative
    /// paths resolve against the listing's directory.
    pub fn from_listing(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            image: PathBuf,
            labels: PathBuf,
            name: Option<String>,
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut set = SourceSet::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let l: Line = serde_json::from_str(line).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
            let name = l.name.unwrap_or_else(|| {
                l.image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            set.pairs.push(SourcePair {
                name,
                source: l.image.to_string_lossy().into_owned(),
                image: base.join(&l.image),
                labels: base.join(&l.labels),
            });
        }
        Ok(set)
    }
}

/// Pixel rectangle `[x, y, width, height]` in source image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl From<[usize; 4]> for CropRect {
    fn from([x, y, width, height]: [usize; 4]) -> Self {
        CropRect {
            x,
            y,
            width,
            height,
        }
    }
}

impl From<CropRect> for [usize; 4] {
    fn from(c: CropRect) -> Self {
        [c.x, c.y, c.width, c.height]
    }
}

impl CropRect {
    fn check(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.width > 0
            && self.height > 0
            && self.x.checked_add(self.width).is_some_and(|r| r <= width)
            && self.y.checked_add(self.height).is_some_and(|b| b <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "crop {:?} outside {width}x{height} source",
                <[usize; 4]>::from(*self)
            )))
        }
    }
}

/// Per-source crop rectangles, keyed by source name (file stem).
pub type CropList = BTreeMap<String, Vec<CropRect>>;

pub fn load_crop_list(path: &Path) -> Result<CropList> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: String,
    pub crop: Option<CropRect>,
    pub phi: f64,
    pub theta: f64,
    /// Relative to the output directory.
    pub image: String,
    pub labels: String,
    pub coverage: f64,
    /// SHA-256 of the image PNG bytes followed by the label PNG bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("serializable entry") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Manifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Entry counts per φ, in first-seen order.
    pub fn counts_by_phi(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(p, _)| *p == e.phi) {
                Some((_, c)) => *c += 1,
                None => out.push((e.phi, 1)),
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct EntryFailure {
    pub source: String,
    pub crop: Option<CropRect>,
    pub error: Error,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub unpaired: Vec<PathBuf>,
    pub failures: Vec<EntryFailure>,
}

struct Bucket {
    phi: Angle,
    dir: String,
    plan: ProjectionPlan,
    label_plan: ProjectionPlan,
}

/// One projected, cropped sample ready to write.
struct Rendered {
    image_png: Vec<u8>,
    labels_png: Vec<u8>,
    coverage: f64,
}

fn render(
    img: &RasterImage,
    labels: &LabelMap,
    bucket: &Bucket,
    cfg: &SweepConfig,
) -> Result<Rendered> {
    let (eq_img, mask) = bucket.plan.apply_image(img)?;
    let (eq_lbl, _) = bucket.label_plan.apply_labels(labels)?;
    let mut tile_img = crop_to_upper_tile(&eq_img, &mask, cfg.tile)?;
    let mut tile_lbl = crop_to_upper_tile(&eq_lbl, &mask, cfg.tile)?;
    let tile_mask = crop_to_upper_tile(&mask, &mask, cfg.tile)?;
    if cfg.mirror {
        tile_img = tile_img.flipped_vertically();
        tile_lbl = tile_lbl.flipped_vertically();
    }
    Ok(Rendered {
        image_png: tile_img.encode_png(),
        labels_png: tile_lbl.encode_png(),
        coverage: tile_mask.coverage(),
    })
}

fn digest(a: &[u8], b: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(a);
    h.update(b);
    hex::encode(h.finalize())
}

fn load_pair(pair: &SourcePair, lut: &[u8; 256]) -> Result<(RasterImage, LabelMap)> {
    let img = RasterImage::load_png(&pair.image)?;
    let mut labels = LabelMap::load_png(&pair.labels)?;
    if (img.width(), img.height()) != (labels.width(), labels.height()) {
        return Err(Error::domain(format!(
            "{}: image {}x{} and labels {}x{} differ in size",
            pair.name,
            img.width(),
            img.height(),
            labels.width(),
            labels.height()
        )));
    }
    labels.remap(lut);
    Ok((img, labels))
}

/// A unit of work: one source pair with one optional crop.
struct Item<'a> {
    pair: &'a SourcePair,
    crop: Option<CropRect>,
    stem: String,
}

fn run(
    items: &[Item<'_>],
    out_dir: &Path,
    cfg: &SweepConfig,
    class_map: Option<&ClassMap>,
) -> Result<(Vec<ManifestEntry>, Vec<EntryFailure>)> {
    let lut = match class_map {
        Some(m) => m.lookup(cfg.classes.len()),
        None => identity_lookup(cfg.classes.len()),
    };
    let buckets: Vec<Bucket> = cfg
        .phis
        .iter()
        .map(|&phi| {
            let job = cfg.job(phi)?;
            Ok(Bucket {
                phi,
                dir: phi.dir_name(),
                plan: ProjectionPlan::build(&job)?,
                label_plan: ProjectionPlan::build(&job.with_interp(Interp::Nearest))?,
            })
        })
        .collect::<Result<_>>()?;
    let n = buckets[0].plan.job().n();

    // per item: one result per bucket, or a single item-level failure
    let results: Vec<std::result::Result<Vec<Result<ManifestEntry>>, Error>> =
        par::map(items, |item| {
            let (img, labels) = load_pair(item.pair, &lut)?;
            let (img, labels) = match item.crop {
                Some(c) => {
                    c.check(img.width(), img.height())?;
                    (
                        img.crop_wrapped(c.x, c.y, c.width, c.height),
                        labels.crop_wrapped(c.x, c.y, c.width, c.height),
                    )
                }
                None => (img, labels),
            };
            let img = resize_square(&img, n)?;
            let labels = resize_square(&labels, n)?;
            Ok(buckets
                .iter()
                .map(|b| {
                    let r = render(&img, &labels, b, cfg)?;
                    let image = format!("{}/images/{}.png", b.dir, item.stem);
                    let label_path = format!("{}/labels/{}.png", b.dir, item.stem);
                    write_file(&out_dir.join(&image), &r.image_png)?;
                    write_file(&out_dir.join(&label_path), &r.labels_png)?;
                    Ok(ManifestEntry {
                        source: item.pair.source.clone(),
                        crop: item.crop,
                        phi: b.phi.radians(),
                        theta: cfg.theta.radians(),
                        image,
                        labels: label_path,
                        coverage: r.coverage,
                        sha256: digest(&r.image_png, &r.labels_png),
                    })
                })
                .collect())
        });

    // φ-major order: every source for the first φ, then the next φ, …
    let mut per_bucket: Vec<Vec<ManifestEntry>> = vec![Vec::new(); buckets.len()];
    let mut failures = Vec::new();
    for (item, res) in items.iter().zip(results) {
        let fail = |error| EntryFailure {
            source: item.pair.source.clone(),
            crop: item.crop,
            error,
        };
        match res {
            Ok(entries) => {
                for (k, e) in entries.into_iter().enumerate() {
                    match e {
                        Ok(e) => per_bucket[k].push(e),
                        Err(err) => failures.push(fail(err)),
                    }
                }
            }
            Err(err) => failures.push(fail(err)),
        }
    }
    Ok((per_bucket.into_iter().flatten().collect(), failures))
}

fn finish(
    out_dir: &Path,
    cfg: &SweepConfig,
    entries: Vec<ManifestEntry>,
    failures: Vec<EntryFailure>,
    unpaired: Vec<PathBuf>,
) -> Result<RunOutcome> {
    let manifest = Manifest { entries };
    write_file(&out_dir.join(MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    let summary = serde_json::to_string_pretty(cfg).expect("serializable config") + "\n";
    write_file(&out_dir.join("config.json"), summary.as_bytes())?;
    Ok(RunOutcome {
        manifest,
        unpaired,
        failures,
    })
}

fn require_pairs(sources: &SourceSet) -> Result<()> {
    if !sources.unpaired.is_empty() {
        log::warn!(
            "{} input file(s) without a partner were skipped",
            sources.unpaired.len()
        );
    }
    if sources.pairs.is_empty() {
        return Err(Error::domain("no usable image/label pairs in input"));
    }
    Ok(())
}

/// Projects every source pair at every configured φ.
pub fn build_sweep(
    sources: &SourceSet,
    out_dir: &Path,
    cfg: &SweepConfig,
    class_map: Option<&ClassMap>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    require_pairs(sources)?;
    let items: Vec<Item> = sources
        .pairs
        .iter()
        .map(|pair| Item {
            pair,
            crop: None,
            stem: pair.name.clone(),
        })
        .collect();
    let (entries, failures) = run(&items, out_dir, cfg, class_map)?;
    finish(out_dir, cfg, entries, failures, sources.unpaired.clone())
}

/// Projects each source (or each of its crops) once at the configured single φ.
pub fn build_testset(
    sources: &SourceSet,
    out_dir: &Path,
    cfg: &SweepConfig,
    crops: &CropList,
    class_map: Option<&ClassMap>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if cfg.phis.len() != 1 {
        return Err(Error::domain(format!(
            "test set needs exactly one phi, got {}",
            cfg.phis.len()
        )));
    }
    require_pairs(sources)?;
    let mut items = Vec::new();
    for pair in &sources.pairs {
        match crops.get(&pair.name).filter(|c| !c.is_empty()) {
            None => items.push(Item {
                pair,
                crop: None,
                stem: pair.name.clone(),
            }),
            Some(list) => items.extend(list.iter().enumerate().map(|(k, &c)| Item {
                pair,
                crop: Some(c),
                stem: format!("{}_crop{k}", pair.name),
            })),
        }
    }
    let (entries, failures) = run(&items, out_dir, cfg, class_map)?;
    finish(out_dir, cfg, entries, failures, sources.unpaired.clone())
}
