use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::*;
use super::record::{Category, Convention, QaRecord, QuestionKind};
use crate::depth::DepthSource;
use crate::rng::{rng_for, SeedPart};
use crate::scene::{subsample_frames, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub seed: u64,
    /// Reference-frame rate after sub-sampling.
    pub target_fps: f64,
    pub categories: BTreeSet<Category>,
    pub max_questions_per_frame_per_category: usize,
    pub distance_overlap_rejection: bool,
    pub convention: Convention,
    /// Uniform range for scale-augmented copies of distance records.
    pub scale_aug: Option<(f64, f64)>,
    pub depth_source_for_cot: DepthSource,
    /// Attach depth reasoning steps to eligible records.
    pub cot: bool,
    /// Labels added to the scene-derived vocabulary for negative sampling.
    pub extra_vocabulary: Vec<String>,
}

pub const DEFAULT_SCALE_RANGE: (f64, f64) = (1.0, 10.0);

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: 0,
            target_fps: 1.0,
            categories: Category::ALL.into_iter().collect(),
            max_questions_per_frame_per_category: 4,
            distance_overlap_rejection: true,
            convention: Convention::Obb,
            scale_aug: None,
            depth_source_for_cot: DepthSource::Gt,
            cot: true,
            extra_vocabulary: Vec::new(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), QaError> {
        if !(self.target_fps.is_finite() && self.target_fps > 0.0) {
            return Err(QaError::InvalidConfig("target_fps must be positive"));
        }
        if self.max_questions_per_frame_per_category == 0 {
            return Err(QaError::InvalidConfig("max_questions_per_frame_per_category must be at least 1"));
        }
        if let Some((lo, hi)) = self.scale_aug {
            if !(lo.is_finite() && hi.is_finite() && lo >= 1.0 && hi >= lo) {
                return Err(QaError::InvalidConfig("scale_aug range must satisfy 1 <= lo <= hi"));
            }
        }
        Ok(())
    }
}

/// A candidate dropped during generation, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub video_id: String,
    pub frame_id: String,
    pub category: Category,
    pub reason: QaError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub records: Vec<QaRecord>,
    pub skipped: Vec<Skipped>,
}

/// Work list for a dataset: the shared vocabulary and `(scene, frame)` index
/// pairs in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub vocabulary: Vec<String>,
    pub units: Vec<(usize, usize)>,
}

/// Union of all scene labels and the configured extras, sorted.
pub fn dataset_vocabulary(scenes: &[Scene], config: &GenerationConfig) -> Vec<String> {
    let mut vocab: BTreeSet<String> = scenes.iter().flat_map(Scene::labels).collect();
    vocab.extend(config.extra_vocabulary.iter().cloned());
    vocab.into_iter().collect()
}

/// Indices (into `scene.frames`) of the sub-sampled reference frames.
pub fn reference_frames(scene: &Scene, target_fps: f64) -> Result<Vec<usize>, QaError> {
    let sub = subsample_frames(scene, target_fps).map_err(|_| QaError::InvalidConfig("target_fps"))?;
    Ok(sub
        .frames
        .iter()
        .filter_map(|f| scene.frame_index(&f.frame_id))
        .collect())
}

pub fn plan_dataset(scenes: &[Scene], config: &GenerationConfig) -> Result<DatasetPlan, QaError> {
    config.validate()?;
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    order.sort_by(|&a, &b| scenes[a].video_id.cmp(&scenes[b].video_id));
    let mut units = Vec::new();
    for s in order {
        let target = config.target_fps.min(scenes[s].fps);
        for f in reference_frames(&scenes[s], target)? {
            units.push((s, f));
        }
    }
    Ok(DatasetPlan {
        vocabulary: dataset_vocabulary(scenes, config),
        units,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetOutput {
    pub records: Vec<QaRecord>,
    pub skipped: Vec<Skipped>,
}

/// Sequential driver: every planned frame in order. Parallel callers run
/// [`generate_frame`] over [`plan_dataset`] units and concatenate in order.
pub fn generate_dataset(scenes: &[Scene], config: &GenerationConfig) -> Result<DatasetOutput, QaError> {
    let plan = plan_dataset(scenes, config)?;
    let mut out = DatasetOutput::default();
    for (s, f) in plan.units {
        let frame = generate_frame(&scenes[s], f, config, &plan.vocabulary);
        out.records.extend(frame.records);
        out.skipped.extend(frame.skipped);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Candidate {
    Pair(String, String, QuestionKind),
    Single(String, QuestionKind),
    Label(String),
    Negative,
}

/// Every record for one reference frame, grouped by category in
/// [`Category::ALL`] order.
pub fn generate_frame(
    scene: &Scene,
    frame_index: usize,
    config: &GenerationConfig,
    vocabulary: &[String],
) -> FrameOutput {
    let frame = &scene.frames[frame_index];
    let ctx = FrameContext::new(scene, frame)
        .with_convention(config.convention)
        .with_overlap_rejection(config.distance_overlap_rejection);
    let mut gen = FrameGen {
        ctx: &ctx,
        config,
        vocabulary,
        out: FrameOutput::default(),
    };
    let unique = ctx.unique_objects();
    let labels = ctx.visible_labels();
    let mut pairs = Vec::new();
    for (i, a) in unique.iter().enumerate() {
        for b in &unique[i + 1..] {
            pairs.push((a.clone(), b.clone()));
        }
    }
    let pair_kinds = |kinds: &[QuestionKind]| -> Vec<Candidate> {
        pairs
            .iter()
            .flat_map(|(a, b)| kinds.iter().map(|k| Candidate::Pair(a.clone(), b.clone(), *k)))
            .collect()
    };
    let single_kinds = |kinds: &[QuestionKind]| -> Vec<Candidate> {
        unique
            .iter()
            .flat_map(|a| kinds.iter().map(|k| Candidate::Single(a.clone(), *k)))
            .collect()
    };
    let sizes = [QuestionKind::Width, QuestionKind::Length, QuestionKind::Height];
    for category in Category::ALL {
        if !config.categories.contains(&category) {
            continue;
        }
        let candidates: Vec<Candidate> = match category {
            Category::BinaryViewpoint => pair_kinds(&[QuestionKind::LeftRight, QuestionKind::FrontBehind]),
            Category::BinarySize => pair_kinds(&sizes),
            Category::BinaryPresence | Category::Counting => {
                let mut c: Vec<Candidate> = labels.iter().cloned().map(Candidate::Label).collect();
                if category == Category::Counting {
                    c.push(Candidate::Negative);
                }
                c
            }
            Category::Multichoice => {
                let mut c = single_kinds(&[
                    QuestionKind::EgoDistance,
                    QuestionKind::Width,
                    QuestionKind::Length,
                    QuestionKind::Height,
                    QuestionKind::Box2d,
                    QuestionKind::Box3d,
                ]);
                c.extend(pair_kinds(&[QuestionKind::MinDistance, QuestionKind::CenterDistance]));
                c.extend(labels.iter().cloned().map(Candidate::Label));
                c.push(Candidate::Negative);
                c
            }
            Category::RegressionEgoDist => single_kinds(&[QuestionKind::EgoDistance]),
            Category::RegressionObjDist => pair_kinds(&[QuestionKind::MinDistance]),
            Category::RegressionCenterDist => pair_kinds(&[QuestionKind::CenterDistance]),
            Category::RegressionSize => single_kinds(&sizes),
            Category::Grounding2d => single_kinds(&[QuestionKind::Box2d]),
            Category::Grounding3d => single_kinds(&[QuestionKind::Box3d]),
        };
        gen.run(category, candidates);
    }
    gen.out
}

struct FrameGen<'c, 'a> {
    ctx: &'c FrameContext<'a>,
    config: &'c GenerationConfig,
    vocabulary: &'c [String],
    out: FrameOutput,
}

impl FrameGen<'_, '_> {
    fn seed_parts<'p>(&'p self, category: Category, tail: SeedPart<'p>) -> [SeedPart<'p>; 5] {
        [
            SeedPart::Int(self.config.seed),
            SeedPart::Str(&self.ctx.scene.video_id),
            SeedPart::Str(&self.ctx.frame.frame_id),
            SeedPart::Str(category.name()),
            tail,
        ]
    }

    fn run(&mut self, category: Category, mut candidates: Vec<Candidate>) {
        let mut order = rng_for(&self.seed_parts(category, SeedPart::Str("order")));
        candidates.shuffle(&mut order);
        let cap = self.config.max_questions_per_frame_per_category;
        // presence records come in yes/no pairs; the cap counts pairs
        let cap = if category == Category::BinaryPresence { (cap / 2).max(1) } else { cap };
        let mut produced = 0usize;
        let mut block: Vec<QaRecord> = Vec::new();
        for (attempt, c) in candidates.iter().enumerate() {
            if produced >= cap {
                break;
            }
            let mut rng = rng_for(&self.seed_parts(category, SeedPart::Int(attempt as u64)));
            match self.make(category, c, &mut rng) {
                Ok(records) => {
                    produced += 1;
                    block.extend(records);
                }
                Err(reason) => self.out.skipped.push(Skipped {
                    video_id: self.ctx.scene.video_id.clone(),
                    frame_id: self.ctx.frame.frame_id.clone(),
                    category,
                    reason,
                }),
            }
        }
        let prefix = format!("{}:{}:{}", self.ctx.scene.video_id, self.ctx.frame.frame_id, category.name());
        for (k, mut record) in block.into_iter().enumerate() {
            record.record_id = format!("{prefix}:{k}");
            let scaled = match self.config.scale_aug {
                Some(range) if is_scalable(&record) => {
                    let mut rng = rng_for(&self.seed_parts(category, SeedPart::Str(&record.record_id)));
                    let s = sample_scale_factor(range, &mut rng);
                    let mut copy = scale_record(&record, s).expect("sampled factor is at least 1");
                    copy.record_id = format!("{}:scaled", record.record_id);
                    Some(copy)
                }
                _ => None,
            };
            self.out.records.push(record);
            self.out.records.extend(scaled);
        }
    }

    fn make(&self, category: Category, c: &Candidate, rng: &mut ChaCha8Rng) -> Result<Vec<QaRecord>, QaError> {
        let ctx = self.ctx;
        let base = match (category, c) {
            (Category::BinaryViewpoint, Candidate::Pair(a, b, k)) => {
                let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                gen_binary_viewpoint(ctx, a, b, *k, rng)?
            }
            (Category::BinarySize, Candidate::Pair(a, b, k)) => {
                let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                gen_binary_size(ctx, a, b, *k, rng)?
            }
            (Category::BinaryPresence, Candidate::Label(l)) => {
                let (pos, neg) = gen_binary_presence(ctx, l, self.vocabulary, rng)?;
                return Ok(alloc::vec![pos, neg]);
            }
            (Category::Multichoice, c) => {
                let base = self.make_base(c, rng)?;
                return Ok(alloc::vec![gen_multichoice(&base, self.vocabulary, rng)?]);
            }
            (_, c) => self.make_base(c, rng)?,
        };
        let base = if self.config.cot && is_cot_eligible(&base) {
            build_cot_sequence(base, ctx.frame, self.config.depth_source_for_cot)?
        } else {
            base
        };
        Ok(alloc::vec![base])
    }

    fn make_base(&self, c: &Candidate, rng: &mut ChaCha8Rng) -> Result<QaRecord, QaError> {
        let ctx = self.ctx;
        match c {
            Candidate::Label(l) => gen_counting(ctx, l, rng),
            Candidate::Negative => gen_counting_negative(ctx, self.vocabulary, rng),
            Candidate::Single(a, QuestionKind::Box2d) => gen_grounding_2d(ctx, a, rng),
            Candidate::Single(a, QuestionKind::Box3d) => gen_grounding_3d(ctx, a, rng),
            Candidate::Single(a, k) => gen_regression(ctx, *k, &[a], rng),
            Candidate::Pair(a, b, k) => {
                let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                gen_regression(ctx, *k, &[a, b], rng)
            }
        }
    }
}
