use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::record::{
    choice_letter, format_box2d, format_box3d, format_meters, Answer, Category, Convention,
    CotStep, QaRecord, QuestionKind,
};
use super::templates::{self as tpl, fill, fill_box, pick};
use crate::depth::DepthSource;
use crate::geometry::{
    backproject_depth, center_distance, egocentric_distance, iou_3d_yaw, min_cloud_distance,
    project_box_to_2d, GeometryError, OrientedBox3D, PointCloud,
};
use crate::scene::{Frame, ObjectAnnotation, Scene, VisibleObject};

/// Left/right questions need 2D box centers at least this far apart (px).
pub const LEFT_RIGHT_MIN_GAP_PX: f64 = 2.0;
/// Front/behind questions need camera-to-center distances this far apart (m).
pub const FRONT_BEHIND_MIN_GAP_M: f64 = 0.02;
/// Size comparisons need this relative difference.
pub const SIZE_MIN_RELATIVE_GAP: f64 = 0.05;
/// Inflation of the 3D box when segmenting an object's points (m).
pub const CLOUD_BOX_MARGIN_M: f64 = 0.01;
/// Multichoice regression step floor (m) and fraction of the answer.
pub const DISTRACTOR_MIN_STEP_M: f64 = 0.05;
pub const DISTRACTOR_STEP_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaError {
    #[error("label `{0}` has several visible instances")]
    Ambiguous(String),
    #[error("label `{0}` is not visible")]
    Absent(String),
    #[error("object `{0}` is not visible in this frame")]
    NotVisible(String),
    #[error("object `{0}` is not annotated in this scene")]
    UnknownObject(String),
    #[error("frame `{0}` is not part of this scene")]
    UnknownFrame(String),
    #[error("answer too close to a tie")]
    TieSkipped,
    #[error("no vocabulary label is absent from the frame")]
    NoNegativeAvailable,
    #[error("3D boxes of `{0}` and `{1}` overlap")]
    OverlapRejected(String, String),
    #[error("no depth points fall inside object `{0}`")]
    EmptyCloud(String),
    #[error("frame has no {0:?} depth map")]
    MissingDepth(DepthSource),
    #[error("no valid depth inside the 2D box of `{0}`")]
    EmptyDepthRegion(String),
    #[error("object `{0}` is entirely behind the camera")]
    FullyBehindCamera(String),
    #[error("not enough distinct distractors")]
    InsufficientDistractors,
    #[error("{0} records cannot seed a multichoice question")]
    UnsupportedBase(Category),
    #[error("{0} records carry no depth reasoning")]
    NotCotEligible(Category),
    #[error("wrong number of referenced objects for {0:?}")]
    WrongArity(QuestionKind),
    #[error("scale factor must be finite and at least 1, got {0}")]
    InvalidScale(f64),
    #[error("invalid generation config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Outcome of looking up a label among the visible objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unambiguity {
    Unique(String),
    Ambiguous,
    Absent,
}

pub fn check_unambiguous(scene: &Scene, frame: &Frame, label: &str) -> Unambiguity {
    let mut found = None;
    for v in &frame.visible_objects {
        if scene.object(&v.object_id).is_some_and(|o| o.label == label) {
            if found.is_some() {
                return Unambiguity::Ambiguous;
            }
            found = Some(v.object_id.clone());
        }
    }
    match found {
        Some(id) => Unambiguity::Unique(id),
        None => Unambiguity::Absent,
    }
}

/// Box used for size and 3D-box answers under `convention`.
pub fn convention_box(b: &OrientedBox3D, convention: Convention) -> OrientedBox3D {
    match convention {
        Convention::Obb => *b,
        Convention::Aabb => b
            .to_aabb()
            .to_oriented()
            .expect("hull of a valid box is a valid box"),
    }
}

/// Everything generators need about one reference frame. Object point clouds
/// are built lazily and cached.
pub struct FrameContext<'a> {
    pub scene: &'a Scene,
    pub frame: &'a Frame,
    pub convention: Convention,
    pub overlap_rejection: bool,
    clouds: RefCell<BTreeMap<String, Result<PointCloud, QaError>>>,
}

pub(crate) struct Resolved<'a> {
    pub object: &'a ObjectAnnotation,
    pub visible: &'a VisibleObject,
}

impl<'a> FrameContext<'a> {
    pub fn new(scene: &'a Scene, frame: &'a Frame) -> Self {
        FrameContext {
            scene,
            frame,
            convention: Convention::Obb,
            overlap_rejection: true,
            clouds: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_overlap_rejection(mut self, on: bool) -> Self {
        self.overlap_rejection = on;
        self
    }

    /// Labels of the visible objects, deduplicated, in visibility order.
    pub fn visible_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in &self.frame.visible_objects {
            if let Some(o) = self.scene.object(&v.object_id) {
                if !out.contains(&o.label) {
                    out.push(o.label.clone());
                }
            }
        }
        out
    }

    /// Visible objects whose label has exactly one visible instance.
    pub fn unique_objects(&self) -> Vec<String> {
        self.visible_labels()
            .iter()
            .filter_map(|l| match check_unambiguous(self.scene, self.frame, l) {
                Unambiguity::Unique(id) => Some(id),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn resolve(&self, object_id: &str) -> Result<Resolved<'a>, QaError> {
        let object = self
            .scene
            .object(object_id)
            .ok_or_else(|| QaError::UnknownObject(object_id.into()))?;
        let visible = self
            .frame
            .visible(object_id)
            .ok_or_else(|| QaError::NotVisible(object_id.into()))?;
        match check_unambiguous(self.scene, self.frame, &object.label) {
            Unambiguity::Unique(_) => Ok(Resolved { object, visible }),
            Unambiguity::Ambiguous => Err(QaError::Ambiguous(object.label.clone())),
            Unambiguity::Absent => Err(QaError::Absent(object.label.clone())),
        }
    }

    /// GT-depth points inside the object's 2D box whose backprojection lies in
    /// its (slightly inflated) 3D box.
    pub fn object_cloud(&self, object_id: &str) -> Result<PointCloud, QaError> {
        if let Some(hit) = self.clouds.borrow().get(object_id) {
            return hit.clone();
        }
        let built = self.build_cloud(object_id);
        self.clouds
            .borrow_mut()
            .insert(object_id.to_string(), built.clone());
        built
    }

    fn build_cloud(&self, object_id: &str) -> Result<PointCloud, QaError> {
        let visible = self
            .frame
            .visible(object_id)
            .ok_or_else(|| QaError::NotVisible(object_id.into()))?;
        let depth = self
            .frame
            .depth(DepthSource::Gt)
            .ok_or(QaError::MissingDepth(DepthSource::Gt))?;
        let empty = || QaError::EmptyCloud(object_id.into());
        let cloud = backproject_depth(depth, &self.frame.intrinsics, Some(&visible.box2d))
            .map_err(|e| match e {
                GeometryError::EmptyRegion => empty(),
                other => QaError::Geometry(other),
            })?;
        cloud
            .retain_inside(&visible.box_camera, CLOUD_BOX_MARGIN_M)
            .map_err(|_| empty())
    }

    fn record(
        &self,
        category: Category,
        kind: QuestionKind,
        question: String,
        answer: Answer,
        refs: &[&Resolved<'_>],
    ) -> QaRecord {
        QaRecord {
            record_id: String::new(),
            video_id: self.scene.video_id.clone(),
            frame_id: self.frame.frame_id.clone(),
            category,
            kind,
            question,
            answer,
            choices: None,
            choice_values: None,
            source_category: None,
            cot_steps: None,
            referenced_objects: refs.iter().map(|r| r.object.object_id.clone()).collect(),
            referenced_labels: refs.iter().map(|r| r.object.label.clone()).collect(),
            convention: self.convention,
            scale_factor: 1.0,
        }
    }

    fn answer_box(&self, r: &Resolved<'_>) -> OrientedBox3D {
        convention_box(&r.visible.box_camera, self.convention)
    }
}

/// Left/right or front/behind question about an ordered pair.
pub fn gen_binary_viewpoint<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    a: &str,
    b: &str,
    kind: QuestionKind,
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let (ra, rb) = (ctx.resolve(a)?, ctx.resolve(b)?);
    let positive = rng.gen_bool(0.5);
    let (bank, answer) = match kind {
        QuestionKind::LeftRight => {
            let (xa, xb) = (ra.visible.box2d.center().0, rb.visible.box2d.center().0);
            if (xa - xb).abs() < LEFT_RIGHT_MIN_GAP_PX {
                return Err(QaError::TieSkipped);
            }
            if positive {
                (tpl::LEFT_OF, xa < xb)
            } else {
                (tpl::RIGHT_OF, xa > xb)
            }
        }
        QuestionKind::FrontBehind => {
            let da = ctx.answer_box(&ra).center().norm();
            let db = ctx.answer_box(&rb).center().norm();
            if (da - db).abs() < FRONT_BEHIND_MIN_GAP_M {
                return Err(QaError::TieSkipped);
            }
            if positive {
                (tpl::IN_FRONT_OF, da < db)
            } else {
                (tpl::BEHIND, da > db)
            }
        }
        other => return Err(QaError::WrongArity(other)),
    };
    let question = fill(pick(bank, rng), &ra.object.label, Some(&rb.object.label));
    Ok(ctx.record(
        Category::BinaryViewpoint,
        kind,
        question,
        Answer::Binary(answer),
        &[&ra, &rb],
    ))
}

fn size_component(b: &OrientedBox3D, kind: QuestionKind) -> Option<f64> {
    let d = b.object_dimensions();
    match kind {
        QuestionKind::Width => Some(d.width),
        QuestionKind::Length => Some(d.length),
        QuestionKind::Height => Some(d.height),
        _ => None,
    }
}

/// Relative size comparison along `kind` (width, length or height).
pub fn gen_binary_size<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    a: &str,
    b: &str,
    kind: QuestionKind,
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let (ra, rb) = (ctx.resolve(a)?, ctx.resolve(b)?);
    let va = size_component(&ctx.answer_box(&ra), kind).ok_or(QaError::WrongArity(kind))?;
    let vb = size_component(&ctx.answer_box(&rb), kind).ok_or(QaError::WrongArity(kind))?;
    if (va - vb).abs() < SIZE_MIN_RELATIVE_GAP * va.max(vb) {
        return Err(QaError::TieSkipped);
    }
    let (greater, smaller) = match kind {
        QuestionKind::Width => (tpl::WIDER, tpl::NARROWER),
        QuestionKind::Length => (tpl::LONGER, tpl::SHORTER_LENGTH),
        _ => (tpl::TALLER, tpl::SHORTER),
    };
    let (bank, answer) = if rng.gen_bool(0.5) {
        (greater, va > vb)
    } else {
        (smaller, va < vb)
    };
    let question = fill(pick(bank, rng), &ra.object.label, Some(&rb.object.label));
    Ok(ctx.record(
        Category::BinarySize,
        kind,
        question,
        Answer::Binary(answer),
        &[&ra, &rb],
    ))
}

/// Uniformly sampled vocabulary label with no visible instance.
pub fn sample_absent_label<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    vocabulary: &[String],
    rng: &mut R,
) -> Result<String, QaError> {
    let present = ctx.visible_labels();
    let absent: Vec<&String> = vocabulary.iter().filter(|l| !present.contains(l)).collect();
    absent
        .choose(rng)
        .map(|l| (*l).clone())
        .ok_or(QaError::NoNegativeAvailable)
}

/// A "yes" question about `label` and a "no" question about an absent label.
pub fn gen_binary_presence<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    label: &str,
    vocabulary: &[String],
    rng: &mut R,
) -> Result<(QaRecord, QaRecord), QaError> {
    if !ctx.visible_labels().iter().any(|l| l == label) {
        return Err(QaError::Absent(label.into()));
    }
    let negative = sample_absent_label(ctx, vocabulary, rng)?;
    let pos_q = fill(pick(tpl::PRESENCE, rng), label, None);
    let neg_q = fill(pick(tpl::PRESENCE, rng), &negative, None);
    let mut pos = ctx.record(
        Category::BinaryPresence,
        QuestionKind::Presence,
        pos_q,
        Answer::Binary(true),
        &[],
    );
    pos.referenced_labels = vec![label.into()];
    let mut neg = ctx.record(
        Category::BinaryPresence,
        QuestionKind::Absence,
        neg_q,
        Answer::Binary(false),
        &[],
    );
    neg.referenced_labels = vec![negative];
    Ok((pos, neg))
}

/// Number of visible instances of `label` (0 for absent labels).
pub fn gen_counting<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    label: &str,
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let ids: Vec<String> = ctx
        .frame
        .visible_objects
        .iter()
        .filter(|v| ctx.scene.object(&v.object_id).is_some_and(|o| o.label == label))
        .map(|v| v.object_id.clone())
        .collect();
    let kind = if ids.is_empty() {
        QuestionKind::CountAbsent
    } else {
        QuestionKind::Count
    };
    let question = fill(pick(tpl::COUNTING, rng), label, None);
    let mut r = ctx.record(
        Category::Counting,
        kind,
        question,
        Answer::Count(ids.len() as u32),
        &[],
    );
    r.referenced_labels = vec![label.into()];
    r.referenced_objects = ids;
    Ok(r)
}

/// Counting question about a label absent from the frame (answer 0).
pub fn gen_counting_negative<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    vocabulary: &[String],
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let label = sample_absent_label(ctx, vocabulary, rng)?;
    gen_counting(ctx, &label, rng)
}

pub fn regression_category(kind: QuestionKind) -> Option<Category> {
    match kind {
        QuestionKind::EgoDistance => Some(Category::RegressionEgoDist),
        QuestionKind::MinDistance => Some(Category::RegressionObjDist),
        QuestionKind::CenterDistance => Some(Category::RegressionCenterDist),
        QuestionKind::Width | QuestionKind::Length | QuestionKind::Height => {
            Some(Category::RegressionSize)
        }
        _ => None,
    }
}

/// Metric question of `kind` about `refs` (one object, or two for the
/// object-to-object distances).
pub fn gen_regression<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    kind: QuestionKind,
    refs: &[&str],
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let category = regression_category(kind).ok_or(QaError::WrongArity(kind))?;
    let pair = matches!(kind, QuestionKind::MinDistance | QuestionKind::CenterDistance);
    if refs.len() != if pair { 2 } else { 1 } {
        return Err(QaError::WrongArity(kind));
    }
    let resolved = refs
        .iter()
        .map(|id| ctx.resolve(id))
        .collect::<Result<Vec<_>, _>>()?;
    if pair && ctx.overlap_rejection {
        let (a, b) = (&resolved[0].visible.box_camera, &resolved[1].visible.box_camera);
        if iou_3d_yaw(a, b) > 0.0 {
            return Err(QaError::OverlapRejected(refs[0].into(), refs[1].into()));
        }
    }
    let (value, bank) = match kind {
        QuestionKind::EgoDistance => {
            (egocentric_distance(&ctx.object_cloud(refs[0])?), tpl::EGO_DISTANCE)
        }
        QuestionKind::MinDistance => {
            let a = ctx.object_cloud(refs[0])?;
            let b = ctx.object_cloud(refs[1])?;
            (min_cloud_distance(&a, &b), tpl::MIN_DISTANCE)
        }
        QuestionKind::CenterDistance => (
            center_distance(&ctx.answer_box(&resolved[0]), &ctx.answer_box(&resolved[1])),
            tpl::CENTER_DISTANCE,
        ),
        _ => {
            let bank = match kind {
                QuestionKind::Width => tpl::WIDTH,
                QuestionKind::Length => tpl::LENGTH,
                _ => tpl::HEIGHT,
            };
            let v = size_component(&ctx.answer_box(&resolved[0]), kind).expect("size kind");
            (v, bank)
        }
    };
    let labels: Vec<&str> = resolved.iter().map(|r| r.object.label.as_str()).collect();
    let question = fill(pick(bank, rng), labels[0], labels.get(1).copied());
    let refs: Vec<&Resolved<'_>> = resolved.iter().collect();
    Ok(ctx.record(category, kind, question, Answer::Metric(value), &refs))
}

/// Image-clipped 2D box of a uniquely labeled object.
pub fn gen_grounding_2d<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    object_id: &str,
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let r = ctx.resolve(object_id)?;
    let b = project_box_to_2d(&r.visible.box_camera, &ctx.frame.intrinsics, true).map_err(|e| {
        match e {
            GeometryError::FullyBehindCamera => QaError::FullyBehindCamera(object_id.into()),
            other => QaError::Geometry(other),
        }
    })?;
    let question = fill(pick(tpl::GROUNDING_2D, rng), &r.object.label, None);
    Ok(ctx.record(
        Category::Grounding2d,
        QuestionKind::Box2d,
        question,
        Answer::Box2d(b),
        &[&r],
    ))
}

/// Camera-space 3D box (under the context's convention).
pub fn gen_grounding_3d<R: Rng + ?Sized>(
    ctx: &FrameContext<'_>,
    object_id: &str,
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    let r = ctx.resolve(object_id)?;
    if r.visible.box_camera.corners().iter().all(|c| c.z <= 0.0) {
        return Err(QaError::FullyBehindCamera(object_id.into()));
    }
    let question = fill(pick(tpl::GROUNDING_3D, rng), &r.object.label, None);
    Ok(ctx.record(
        Category::Grounding3d,
        QuestionKind::Box3d,
        question,
        Answer::Box3d(ctx.answer_box(&r)),
        &[&r],
    ))
}

/// Distractor values for a metric answer: `answer + k * step` with
/// `step = max(10% of answer, 5 cm)` and `k` in {-1, +1, +2}; when the
/// negative offset would not stay positive, offsets {+1, +2, +3} are used.
pub fn regression_distractors(answer: f64) -> (f64, [f64; 3]) {
    let step = (DISTRACTOR_STEP_FRACTION * answer).max(DISTRACTOR_MIN_STEP_M);
    let ks: [f64; 3] = if answer - step > 0.0 {
        [-1.0, 1.0, 2.0]
    } else {
        [1.0, 2.0, 3.0]
    };
    (step, ks.map(|k| answer + k * step))
}

/// Wrong counting options: always 0 (unless 0 is the answer), then distinct
/// positive integers from `[gt-3, gt+3]`, drawn without replacement.
pub fn counting_distractors<R: Rng + ?Sized>(gt: u32, rng: &mut R) -> Result<[u32; 3], QaError> {
    let mut out: Vec<u32> = Vec::with_capacity(3);
    if gt != 0 {
        out.push(0);
    }
    let pool: Vec<u32> = (gt.saturating_sub(3).max(1)..=gt + 3).filter(|&k| k != gt).collect();
    let need = 3 - out.len();
    if pool.len() < need {
        return Err(QaError::InsufficientDistractors);
    }
    out.extend(pool.choose_multiple(rng, need).copied());
    Ok([out[0], out[1], out[2]])
}

/// Turns a regression, counting or grounding record into a four-way
/// multiple-choice question. Grounding records become referring questions
/// (box given, label asked).
pub fn gen_multichoice<R: Rng + ?Sized>(
    base: &QaRecord,
    vocabulary: &[String],
    rng: &mut R,
) -> Result<QaRecord, QaError> {
    struct Opt {
        text: String,
        value: Option<f64>,
        correct: bool,
    }
    let mut kind = base.kind;
    let mut question = base.question.clone();
    let mut opts: Vec<Opt> = match &base.answer {
        Answer::Metric(a) if base.category.is_regression() => {
            let (_, wrong) = regression_distractors(*a);
            core::iter::once((*a, true))
                .chain(wrong.into_iter().map(|w| (w, false)))
                .map(|(v, correct)| Opt { text: format_meters(v), value: Some(v), correct })
                .collect()
        }
        Answer::Count(n) if base.category == Category::Counting => {
            let wrong = counting_distractors(*n, rng)?;
            core::iter::once((*n, true))
                .chain(wrong.into_iter().map(|w| (w, false)))
                .map(|(v, correct)| Opt { text: v.to_string(), value: Some(v as f64), correct })
                .collect()
        }
        Answer::Box2d(_) | Answer::Box3d(_) if base.category.is_grounding() => {
            let label = base
                .referenced_labels
                .first()
                .ok_or(QaError::WrongArity(base.kind))?;
            let pool: Vec<&String> = vocabulary.iter().filter(|l| *l != label).collect();
            if pool.len() < 3 {
                return Err(QaError::InsufficientDistractors);
            }
            let rendered = match &base.answer {
                Answer::Box2d(b) => {
                    kind = QuestionKind::Referring2d;
                    format_box2d(&b.rounded(), 0)
                }
                Answer::Box3d(b) => {
                    kind = QuestionKind::Referring3d;
                    format_box3d(b)
                }
                _ => unreachable!(),
            };
            question = fill_box(pick(tpl::REFERRING, rng), &rendered);
            core::iter::once((label.clone(), true))
                .chain(pool.choose_multiple(rng, 3).map(|l| ((*l).clone(), false)))
                .map(|(text, correct)| Opt { text, value: None, correct })
                .collect()
        }
        _ => return Err(QaError::UnsupportedBase(base.category)),
    };
    opts.shuffle(rng);
    let letter = choice_letter(opts.iter().position(|o| o.correct).expect("one correct option"));
    let numeric = opts.iter().all(|o| o.value.is_some());
    Ok(QaRecord {
        record_id: String::new(),
        category: Category::Multichoice,
        kind,
        question,
        answer: Answer::Choice(letter),
        choice_values: numeric.then(|| opts.iter().map(|o| o.value.unwrap()).collect()),
        choices: Some(opts.into_iter().map(|o| o.text).collect()),
        source_category: Some(base.category),
        cot_steps: None,
        ..base.clone()
    })
}

/// True for records whose reasoning can be spelled out as depth look-ups.
pub fn is_cot_eligible(record: &QaRecord) -> bool {
    record.category.is_regression()
        || (record.category == Category::BinaryViewpoint && record.kind == QuestionKind::FrontBehind)
}

/// Attaches one depth step per referenced object: its whole-pixel 2D box and
/// the median depth from `source` inside it.
pub fn build_cot_sequence(
    mut record: QaRecord,
    frame: &Frame,
    source: DepthSource,
) -> Result<QaRecord, QaError> {
    if !is_cot_eligible(&record) {
        return Err(QaError::NotCotEligible(record.category));
    }
    let depth = frame.depth(source).ok_or(QaError::MissingDepth(source))?;
    let mut steps = Vec::with_capacity(record.referenced_objects.len());
    for (id, label) in record.referenced_objects.iter().zip(&record.referenced_labels) {
        let visible = frame
            .visible(id)
            .ok_or_else(|| QaError::NotVisible(id.clone()))?;
        let bbox = visible.box2d.rounded();
        let d = depth
            .median_in_box(&bbox)
            .map_err(|_| QaError::EmptyDepthRegion(id.clone()))?;
        steps.push(CotStep {
            object_id: id.clone(),
            label: label.clone(),
            bbox,
            depth: d,
        });
    }
    record.cot_steps = Some(steps);
    Ok(record)
}

/// True for records whose answer is a metric distance (directly or through
/// multichoice options).
pub fn is_scalable(record: &QaRecord) -> bool {
    record.category.is_distance()
        || (record.category == Category::Multichoice
            && record.source_category.is_some_and(Category::is_distance))
}

/// Multiplies every metric distance of `record` by `s`. Records without a
/// distance answer are returned unchanged.
pub fn scale_record(record: &QaRecord, s: f64) -> Result<QaRecord, QaError> {
    if !s.is_finite() || s < 1.0 {
        return Err(QaError::InvalidScale(s));
    }
    let mut out = record.clone();
    if !is_scalable(record) {
        return Ok(out);
    }
    if let Answer::Metric(m) = &mut out.answer {
        *m *= s;
    }
    if let Some(values) = &mut out.choice_values {
        for v in values.iter_mut() {
            *v *= s;
        }
        out.choices = Some(values.iter().map(|v| format_meters(*v)).collect());
    }
    if let Some(steps) = &mut out.cot_steps {
        for step in steps.iter_mut() {
            step.depth *= s;
        }
    }
    out.scale_factor = record.scale_factor * s;
    Ok(out)
}

pub fn apply_scale_augmentation(records: &[QaRecord], s: f64) -> Result<Vec<QaRecord>, QaError> {
    records.iter().map(|r| scale_record(r, s)).collect()
}

/// Scale factor drawn uniformly from `[lo, hi]`.
pub fn sample_scale_factor<R: Rng + ?Sized>(range: (f64, f64), rng: &mut R) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}
