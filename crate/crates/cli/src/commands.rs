use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use utaam::completion::{
    complete_cp_weighted, complete_tucker_power, initialize_missing, InitPolicy, MaskedTensor,
};
use utaam::dataio::{make_missing_mask, mask_presence, write_synthetic, DatasetManifest, SyntheticGenerator, SyntheticSpec};
use utaam::features::HogSpec;
use utaam::fitting::{
    fit, init_centered, init_from_box, normalized_error, pt_pt_error, train_cascade, CascadeRegressor, Jitter,
    TrainConfig, TrainingSample, CASCADE_CHUNK,
};
use utaam::geometry::pts::{parse_pts, read_pts, to_pts_string, write_pts};
use utaam::geometry::{render_texture, AffineParams, FaceShape};
use utaam::image::GrayImage;
use utaam::model::io::ModelFile;
use utaam::model::{default_completion_ranks, CompletionPolicy, CompletionSolver, ShapeParams, UtaamModel};
use utaam::pipeline::{build_model, BuildConfig};
use utaam::tensor::io as tio;
use utaam::Error;

use crate::args::*;
use crate::Failure;

/// Chunk holding the mean training face scale as one little-endian f64.
const INIT_CHUNK: &str = "INIT";
/// Chunk holding the eye landmark sets: u32 count and u32 indices, twice.
const EYES_CHUNK: &str = "EYES";

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gen(a) => gen(a, cli.seed),
        Command::Build(a) => build(a, cli.seed),
        Command::Complete(a) => complete(a, cli.seed),
        Command::Train(a) => train(a, cli.seed),
        Command::Fit(a) => fit_images(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
    }
}

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

fn data(m: impl Into<String>) -> Failure {
    Failure::Lib(Error::Data(m.into()))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| usage(format!("{what}: `{t}` is not a non-negative integer")))
        })
        .collect()
}

fn parse_ranks(s: &Option<String>, what: &str) -> Result<Option<[usize; 5]>, Failure> {
    s.as_deref()
        .map(|s| {
            parse_list(s, what)?
                .try_into()
                .map_err(|_| usage(format!("{what}: expected five comma-separated ranks")))
        })
        .transpose()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn manifest_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

fn gen(a: &GenArgs, seed: u64) -> Outcome {
    let spec = SyntheticSpec {
        extents: [a.identities, a.poses, a.illuminations, a.expressions],
        num_points: a.points,
        image_size: a.image_size,
        seed,
        yaw_range_deg: a.yaw_range,
        identity_sigma: a.identity_sigma,
        expression_amplitude: a.expression_amplitude,
        ..SyntheticSpec::default()
    };
    let g = SyntheticGenerator::new(spec)?;
    let m = write_synthetic(&a.out, &g)?;
    let join = |v: Vec<usize>| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
    std::fs::write(
        a.out.join("dataset.cfg"),
        format!("left-eye = {}\nright-eye = {}\n", join(g.left_eye()), join(g.right_eye())),
    )?;
    println!("wrote {} samples to {}", m.rows.len(), a.out.display());
    Ok(())
}

fn completion_policy(c: &CompletionArgs, shape: Option<[usize; 5]>, texture: Option<[usize; 5]>, seed: u64) -> CompletionPolicy {
    CompletionPolicy {
        init: match c.init {
            Init::Variation => InitPolicy::VariationAware { seed },
            Init::Random => InitPolicy::Random { seed },
        },
        solver: match c.solver {
            Solver::Tucker => CompletionSolver::TuckerPower {
                shape_ranks: shape,
                texture_ranks: texture,
                max_iter: c.max_iter,
                tol: c.tol,
            },
            Solver::Cp => CompletionSolver::CpWopt {
                rank: c.cp_rank,
                max_iter: c.max_iter,
                tol: c.tol,
            },
            Solver::Init => CompletionSolver::InitOnly,
        },
    }
}

/// Left and right eye landmark indices.
type EyeSets = (Vec<usize>, Vec<usize>);

fn eyes(left: &Option<String>, right: &Option<String>) -> Result<Option<EyeSets>, Failure> {
    match (left, right) {
        (Some(l), Some(r)) => Ok(Some((parse_list(l, "--left-eye")?, parse_list(r, "--right-eye")?))),
        (None, None) => Ok(None),
        _ => Err(usage("--left-eye and --right-eye must be given together")),
    }
}

fn eyes_bytes(l: &[usize], r: &[usize]) -> Vec<u8> {
    let mut out = Vec::new();
    for set in [l, r] {
        out.extend((set.len() as u32).to_le_bytes());
        for &k in set {
            out.extend((k as u32).to_le_bytes());
        }
    }
    out
}

fn eyes_from_bytes(b: &[u8]) -> Result<(Vec<usize>, Vec<usize>), Failure> {
    let words: Vec<usize> = b
        .chunks(4)
        .map(|c| c.try_into().map(|w| u32::from_le_bytes(w) as usize))
        .collect::<Result<_, _>>()
        .map_err(|_| data("malformed EYES chunk"))?;
    let nl = *words.first().ok_or_else(|| data("malformed EYES chunk"))?;
    let nr = *words.get(1 + nl).ok_or_else(|| data("malformed EYES chunk"))?;
    if words.len() != 2 + nl + nr {
        return Err(data("malformed EYES chunk"));
    }
    Ok((words[1..1 + nl].to_vec(), words[2 + nl..].to_vec()))
}

fn model_eyes(mf: Option<&ModelFile>, left: &Option<String>, right: &Option<String>) -> Result<Option<EyeSets>, Failure> {
    if let Some(e) = eyes(left, right)? {
        return Ok(Some(e));
    }
    match mf.and_then(|m| m.extra.get(EYES_CHUNK)) {
        Some(b) => Ok(Some(eyes_from_bytes(b)?)),
        None => Ok(None),
    }
}

fn build(a: &BuildArgs, seed: u64) -> Outcome {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let base = manifest_base(&a.manifest);
    let present = match (&a.mask, a.missing) {
        (Some(_), Some(_)) => return Err(usage("--mask and --missing are exclusive")),
        (Some(p), None) => {
            let m = tio::load(p)?;
            if m.dims() != manifest.extents {
                return Err(data(format!(
                    "mask dims {:?} differ from manifest extents {:?}",
                    m.dims(),
                    manifest.extents
                )));
            }
            Some(mask_presence(&m).map_err(|e| data(e.to_string()))?)
        }
        (None, Some(f)) => Some(mask_presence(&make_missing_mask(manifest.extents, f, seed)?)?),
        (None, None) => None,
    };
    let e = manifest.extents;
    let rows: Vec<_> = manifest
        .rows
        .iter()
        .filter(|r| {
            let c = r.cell;
            present.as_ref().is_none_or(|p| p[((c[0] * e[1] + c[1]) * e[2] + c[2]) * e[3] + c[3]])
        })
        .collect();
    let shapes: Vec<([usize; 4], FaceShape)> = rows
        .par_iter()
        .map(|r| Ok((r.cell, read_pts(&resolve(&base, &r.pts))?)))
        .collect::<Result<_, Error>>()?;
    let eyes = eyes(&a.left_eye, &a.right_eye)?;
    let config = BuildConfig {
        reference_height: a.reference_height,
        hog: HogSpec::new(a.hog_patch, a.hog_cell, a.hog_bins, a.hog_eps)?,
        shape_ranks: parse_ranks(&a.shape_ranks, "--shape-ranks")?,
        texture_ranks: parse_ranks(&a.texture_ranks, "--texture-ranks")?,
        completion: completion_policy(
            &a.completion,
            parse_ranks(&a.completion_shape_ranks, "--completion-shape-ranks")?,
            parse_ranks(&a.completion_texture_ranks, "--completion-texture-ranks")?,
            seed,
        ),
        ..BuildConfig::default()
    };
    let built = build_model(
        e,
        manifest.frontal,
        &shapes,
        |k| GrayImage::load_pgm(resolve(&base, &rows[k].image)),
        &config,
    )?;
    let mut mf = ModelFile::new(built.model);
    mf.extra.insert(INIT_CHUNK.into(), built.mean_scale.to_le_bytes().to_vec());
    if let Some((l, r)) = eyes {
        let n = mf.model.num_points();
        if l.iter().chain(&r).any(|&k| k >= n) || l.is_empty() || r.is_empty() {
            return Err(usage(format!("eye sets must be non-empty indices below {n}")));
        }
        mf.extra.insert(EYES_CHUNK.into(), eyes_bytes(&l, &r));
    }
    mf.save(&a.out)?;
    println!(
        "built model from {} samples: {} landmarks, {} texture pixels, {} shape parameters",
        shapes.len(),
        mf.model.num_points(),
        mf.model.texture_len(),
        mf.model.num_shape_params()
    );
    Ok(())
}

fn complete(a: &CompleteArgs, seed: u64) -> Outcome {
    let x = tio::load(&a.tensor)?;
    let mask = tio::load(&a.mask)?;
    if x.order() != 5 {
        return Err(data(format!("expected a 5-way sample tensor, got dims {:?}", x.dims())));
    }
    let masked = if mask.dims() == x.dims() {
        MaskedTensor::new(x, mask)
    } else if mask.dims() == &x.dims()[..4] {
        MaskedTensor::from_cells(x, &mask_presence(&mask)?)
    } else {
        return Err(data(format!("mask dims {:?} fit neither the tensor nor its sample grid", mask.dims())));
    }
    .map_err(|e| data(e.to_string()))?;
    let c = &a.completion;
    let init_policy = match c.init {
        Init::Variation => InitPolicy::VariationAware { seed },
        Init::Random => InitPolicy::Random { seed },
    };
    let (init, _) = initialize_missing(&masked, init_policy)?;
    let (tensor, trace) = match c.solver {
        Solver::Init => (init, Vec::new()),
        Solver::Tucker => {
            let ranks = match &a.ranks {
                Some(s) => parse_list(s, "--ranks")?,
                None => default_completion_ranks(masked.dims()).to_vec(),
            };
            let r = complete_tucker_power(&masked, &init, &ranks, c.max_iter, c.tol)?;
            (r.tensor, r.trace)
        }
        Solver::Cp => {
            let r = complete_cp_weighted(&masked, &init, c.cp_rank, c.max_iter, c.tol, true)?;
            (r.tensor, r.trace)
        }
    };
    tio::save(&a.out, &tensor)?;
    let text: String = trace.iter().map(|v| format!("{v}\n")).collect();
    match &a.trace {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn train(a: &TrainArgs, seed: u64) -> Outcome {
    let mut mf = ModelFile::load(&a.model)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    if manifest.extents != mf.model.extents() {
        return Err(data(format!(
            "manifest extents {:?} differ from model extents {:?}",
            manifest.extents,
            mf.model.extents()
        )));
    }
    let base = manifest_base(&a.manifest);
    let n = manifest.rows.len();
    let chosen: Vec<usize> = if a.max_samples > 0 && a.max_samples < n {
        let mut v = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, a.max_samples).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let samples: Vec<TrainingSample> = chosen
        .par_iter()
        .map(|&k| {
            let r = &manifest.rows[k];
            Ok(TrainingSample {
                image: GrayImage::load_pgm(resolve(&base, &r.image))?,
                truth: read_pts(&resolve(&base, &r.pts))?,
                cell: Some(r.cell),
            })
        })
        .collect::<Result<_, Error>>()?;
    let config = TrainConfig {
        stages: a.stages,
        lambda: a.lambda,
        perturbations: a.perturbations,
        jitter: Jitter {
            scale: a.jitter_scale,
            rotation: a.jitter_rotation.to_radians(),
            translation: a.jitter_translation,
        },
        projection_rounds: a.projection_rounds,
        seed,
    };
    let trained = train_cascade(&mf.model, &samples, &config)?;
    mf.extra.insert(CASCADE_CHUNK.into(), trained.cascade.to_bytes());
    mf.save(a.out.as_ref().unwrap_or(&a.model))?;
    let errs: Vec<String> = trained.errors.iter().map(|e| format!("{e:.4}")).collect();
    println!("trained {} stages on {} images; mean pt-pt error per stage: {}", a.stages, samples.len(), errs.join(" "));
    Ok(())
}

fn load_cascade(mf: &ModelFile) -> Result<CascadeRegressor, Failure> {
    let bytes = mf
        .extra
        .get(CASCADE_CHUNK)
        .ok_or_else(|| data(format!("model file lacks the {CASCADE_CHUNK} chunk; run `utaam train` first")))?;
    let c = CascadeRegressor::from_bytes(bytes)?;
    c.check_model(&mf.model).map_err(|e| data(e.to_string()))?;
    Ok(c)
}

fn init_scale(mf: &ModelFile) -> Result<f64, Failure> {
    let b = mf
        .extra
        .get(INIT_CHUNK)
        .ok_or_else(|| data(format!("model file lacks the {INIT_CHUNK} chunk; pass --bbox or --scale")))?;
    let w: [u8; 8] = b.as_slice().try_into().map_err(|_| data("malformed INIT chunk"))?;
    Ok(f64::from_le_bytes(w))
}

struct Job {
    label: String,
    image: PathBuf,
    truth: Option<PathBuf>,
}

fn report_line(label: &str, e: Option<(f64, Option<f64>)>) -> String {
    match e {
        Some((pt, norm)) => format!("{label} {pt} {}\n", norm.map_or("nan".into(), |v| v.to_string())),
        None => format!("{label} nan nan\n"),
    }
}

fn summary(errs: &[(f64, Option<f64>)]) -> String {
    let n = errs.len().max(1) as f64;
    let pt: f64 = errs.iter().map(|e| e.0).sum::<f64>() / n;
    let norm = if errs.iter().all(|e| e.1.is_some()) && !errs.is_empty() {
        (errs.iter().map(|e| e.1.unwrap()).sum::<f64>() / n).to_string()
    } else {
        "nan".into()
    };
    format!("# mean {pt} {norm}\n")
}

fn score(pred: &FaceShape, truth: &FaceShape, eyes: &Option<(Vec<usize>, Vec<usize>)>) -> Result<(f64, Option<f64>), Failure> {
    let pt = pt_pt_error(pred, truth).map_err(|e| data(e.to_string()))?;
    let norm = match eyes {
        Some((l, r)) => Some(normalized_error(pred, truth, l, r).map_err(|e| data(e.to_string()))?),
        None => None,
    };
    Ok((pt, norm))
}

fn fit_images(a: &FitArgs) -> Outcome {
    let mf = ModelFile::load(&a.model)?;
    let cascade = load_cascade(&mf)?;
    let model = &mf.model;
    let eyes = model_eyes(Some(&mf), &a.left_eye, &a.right_eye)?;
    if a.stride == 0 {
        return Err(usage("--stride must be positive"));
    }
    let mut jobs = Vec::new();
    if let Some(mp) = &a.manifest {
        let m = DatasetManifest::load(mp)?;
        let base = manifest_base(mp);
        for r in m.rows.iter().step_by(a.stride) {
            jobs.push(Job {
                label: r.image.clone(),
                image: resolve(&base, &r.image),
                truth: Some(resolve(&base, &r.pts)),
            });
        }
    }
    for p in &a.images {
        jobs.push(Job {
            label: p.display().to_string(),
            image: p.clone(),
            truth: None,
        });
    }
    if jobs.is_empty() {
        return Err(usage("nothing to fit: pass --manifest or image paths"));
    }
    let bbox = match &a.bbox {
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| usage(format!("--bbox: `{t}` is not a number"))))
                .collect::<Result<_, _>>()?;
            let [cx, cy, h] = v[..] else {
                return Err(usage("--bbox expects cx,cy,height"));
            };
            Some((cx, cy, h))
        }
        None => None,
    };
    let scale = if bbox.is_none() { Some(init_scale(&mf)?) } else { None };
    std::fs::create_dir_all(&a.out)?;
    let results: Vec<Option<(f64, Option<f64>)>> = jobs
        .par_iter()
        .map(|job| {
            let img = GrayImage::load_pgm(&job.image)?;
            let init = match (bbox, scale) {
                (Some((cx, cy, h)), _) => init_from_box(model, cx, cy, h)?,
                (None, Some(s)) => init_centered(model, img.width() as f64 / 2.0, img.height() as f64 / 2.0, s)?,
                (None, None) => unreachable!("scale is loaded when no box is given"),
            };
            let f = fit(&img, &cascade, model, &init, a.texture_rounds)?;
            let text = to_pts_string(&f.shape);
            std::fs::write(a.out.join(format!("{}.pts", stem(&job.label))), &text)?;
            // scored as written so the report matches a later `eval`
            let written = parse_pts(&text)?;
            match &job.truth {
                Some(t) => Ok(Some(score(&written, &read_pts(t)?, &eyes)?)),
                None => Ok(None),
            }
        })
        .collect::<Result<_, Failure>>()?;
    let mut report = String::from("# path pt_pt normalized\n");
    for (job, r) in jobs.iter().zip(&results) {
        report.push_str(&report_line(&job.label, *r));
    }
    let scored: Vec<_> = results.iter().flatten().copied().collect();
    if !scored.is_empty() {
        report.push_str(&summary(&scored));
    }
    std::fs::write(a.report.clone().unwrap_or_else(|| a.out.join("report.txt")), &report)?;
    println!("fitted {} images into {}", jobs.len(), a.out.display());
    Ok(())
}

fn synth(a: &SynthArgs) -> Outcome {
    let mf = ModelFile::load(&a.model)?;
    let model: &UtaamModel = &mf.model;
    let scale = match a.scale {
        Some(s) => s,
        None => init_scale(&mf)?,
    };
    let mut sp = model.training_shape_params(a.identity, a.pose, a.expression, AffineParams::IDENTITY)?;
    let mut tp = model.training_texture_params(a.identity, a.pose, a.illumination, a.expression)?;
    if let Some(v) = &a.interpolate {
        let pose = |s: &str| s.parse::<usize>().map_err(|_| usage(format!("--interpolate: bad pose `{s}`")));
        let t: f64 = v[2].parse().map_err(|_| usage(format!("--interpolate: bad weight `{}`", v[2])))?;
        let (pa, pb) = (pose(&v[0])?, pose(&v[1])?);
        sp.a_p = model.interpolate_pose(pa, pb, t)?;
        tp.b_p = model.interpolate_texture_pose(pa, pb, t)?;
    }
    let placed = place(model, sp, a.width as f64 / 2.0, a.height as f64 / 2.0, scale)?;
    let shape = model.synthesize_shape(&placed)?;
    let texture = model.synthesize_texture(&tp)?;
    let img = render_texture(&texture, &shape, model.mesh(), a.width, a.height, a.background)?;
    img.save_pgm(&a.out)?;
    if let Some(p) = &a.pts {
        write_pts(p, &shape)?;
    }
    Ok(())
}

/// Places shape coefficients so their normalized shape's centroid lands on
/// `(cx, cy)` at the given scale.
fn place(model: &UtaamModel, p: ShapeParams, cx: f64, cy: f64, scale: f64) -> Result<ShapeParams, Failure> {
    let s = FaceShape::new(model.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?)?;
    let (mx, my) = s.centroid();
    Ok(ShapeParams {
        affine: AffineParams::new(scale, 0.0, cx - scale * mx, cy - scale * my)?,
        ..p
    })
}

fn eval(a: &EvalArgs) -> Outcome {
    let m = DatasetManifest::load(&a.manifest)?;
    let base = manifest_base(&a.manifest);
    let mf = a.model.as_ref().map(ModelFile::load).transpose()?;
    let eyes = model_eyes(mf.as_ref(), &a.left_eye, &a.right_eye)?;
    if a.stride == 0 {
        return Err(usage("--stride must be positive"));
    }
    let rows: Vec<_> = m.rows.iter().step_by(a.stride).collect();
    let scores: Vec<(f64, Option<f64>)> = rows
        .par_iter()
        .map(|r| {
            let pred_path = a.pred.join(format!("{}.pts", stem(&r.image)));
            if !pred_path.exists() {
                return Err(data(format!("missing prediction {}", pred_path.display())));
            }
            score(&read_pts(&pred_path)?, &read_pts(&resolve(&base, &r.pts))?, &eyes)
        })
        .collect::<Result<_, Failure>>()?;
    let mut report = String::from("# path pt_pt normalized\n");
    for (r, s) in rows.iter().zip(&scores) {
        report.push_str(&report_line(&r.image, Some(*s)));
    }
    report.push_str(&summary(&scores));
    match &a.out {
        Some(p) => std::fs::write(p, &report)?,
        None => print!("{report}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eye_chunk_round_trip() {
        let b = eyes_bytes(&[1, 2, 3], &[7]);
        assert_eq!(eyes_from_bytes(&b).unwrap(), (vec![1, 2, 3], vec![7]));
        assert!(eyes_from_bytes(&b[..b.len() - 4]).is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1, 2,3", "x").unwrap(), vec![1, 2, 3]);
        assert!(parse_list("1,a", "x").is_err());
        assert!(parse_ranks(&Some("1,2,3".into()), "x").is_err());
        assert_eq!(parse_ranks(&Some("1,2,3,4,5".into()), "x").unwrap(), Some([1, 2, 3, 4, 5]));
    }
}
