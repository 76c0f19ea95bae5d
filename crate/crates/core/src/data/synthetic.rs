//! Deterministic synthetic face-video corpus for desk-scale verification.
//!
//! Each subject gets a procedurally drawn face (unique geometry, skin tone,
//! background and freckle texture) and six 32-frame videos, one per class.
//! Frame 0 is always the neutral face; a smoothstep ramp drives a
//! class-specific deformation over the remaining frames, so the six classes
//! have clearly distinct motion signatures.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::{DatasetRecord, Expression, VideoTensor, CHANNELS, FRAMES, SIZE};
use crate::rng::rng_for;
use crate::tensor::Tensor;

type Color = [f32; 3];

struct Canvas {
    px: Vec<f32>,
}

impl Canvas {
    fn new(bg: Color) -> Self {
        let mut px = vec![0.0; SIZE * SIZE * CHANNELS];
        for p in px.chunks_exact_mut(CHANNELS) {
            p.copy_from_slice(&bg);
        }
        Canvas { px }
    }

    #[inline]
    fn blend(&mut self, x: usize, y: usize, color: Color, alpha: f32) {
        if alpha <= 0.0 {
            return;
        }
        let a = alpha.min(1.0);
        let p = &mut self.px[(y * SIZE + x) * CHANNELS..][..CHANNELS];
        for c in 0..CHANNELS {
            p[c] = (p[c] + a * (color[c] - p[c])).clamp(-1.0, 1.0);
        }
    }

    /// Soft-edged filled ellipse.
    fn ellipse(&mut self, cx: f32, cy: f32, rx: f32, ry: f32, color: Color, opacity: f32) {
        if rx < 0.05 || ry < 0.05 || opacity <= 0.0 {
            return;
        }
        let soft = 0.9;
        let x0 = (cx - rx - 2.0).floor().max(0.0) as usize;
        let x1 = (cx + rx + 2.0).ceil().min(SIZE as f32 - 1.0) as usize;
        let y0 = (cy - ry - 2.0).floor().max(0.0) as usize;
        let y1 = (cy + ry + 2.0).ceil().min(SIZE as f32 - 1.0) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = (x as f32 - cx) / rx;
                let dy = (y as f32 - cy) / ry;
                let d = (dx * dx + dy * dy).sqrt();
                let sd = (d - 1.0) * rx.min(ry);
                let alpha = (0.5 - sd / soft).clamp(0.0, 1.0);
                self.blend(x, y, color, alpha * opacity);
            }
        }
    }

    /// Soft-edged capsule (thick segment) from (x0,y0) to (x1,y1).
    fn capsule(&mut self, a: [f32; 2], b: [f32; 2], r: f32, color: Color, opacity: f32) {
        if opacity <= 0.0 {
            return;
        }
        let soft = 0.9;
        let lo_x = (a[0].min(b[0]) - r - 2.0).floor().max(0.0) as usize;
        let hi_x = (a[0].max(b[0]) + r + 2.0).ceil().min(SIZE as f32 - 1.0) as usize;
        let lo_y = (a[1].min(b[1]) - r - 2.0).floor().max(0.0) as usize;
        let hi_y = (a[1].max(b[1]) + r + 2.0).ceil().min(SIZE as f32 - 1.0) as usize;
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = (ab[0] * ab[0] + ab[1] * ab[1]).max(1e-6);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let ap = [x as f32 - a[0], y as f32 - a[1]];
                let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
                let dx = ap[0] - t * ab[0];
                let dy = ap[1] - t * ab[1];
                let sd = (dx * dx + dy * dy).sqrt() - r;
                let alpha = (0.5 - sd / soft).clamp(0.0, 1.0);
                self.blend(x, y, color, alpha * opacity);
            }
        }
    }

    fn into_tensor(self) -> Tensor<f32> {
        Tensor::from_vec(&[SIZE, SIZE, CHANNELS], self.px)
    }
}

/// Per-subject appearance, drawn once from the subject stream.
struct Face {
    bg: Color,
    skin: Color,
    feature: Color,
    mouth_color: Color,
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
    eye_dx: f32,
    eye_y: f32,
    eye_r: f32,
    mouth_y: f32,
    mouth_w: f32,
    mouth_h: f32,
    brow_y: f32,
    brow_len: f32,
    freckles: Vec<(f32, f32, f32, Color)>,
}

fn range(rng: &mut ChaCha12Rng, lo: f32, hi: f32) -> f32 {
    lo + (hi - lo) * rng.random::<f32>()
}

impl Face {
    fn sample(rng: &mut ChaCha12Rng) -> Face {
        let bg = [
            range(rng, -0.95, -0.6),
            range(rng, -0.95, -0.6),
            range(rng, -0.95, -0.6),
        ];
        let r = range(rng, 0.25, 0.8);
        let skin = [r, r - range(rng, 0.1, 0.3), r - range(rng, 0.3, 0.55)];
        let feature = [
            range(rng, -0.85, -0.5),
            range(rng, -0.85, -0.5),
            range(rng, -0.85, -0.5),
        ];
        let mouth_color = [range(rng, -0.3, 0.1), range(rng, -0.8, -0.5), range(rng, -0.8, -0.5)];
        let (cx, cy) = (range(rng, 29.0, 35.0), range(rng, 29.0, 35.0));
        let rx = range(rng, 17.0, 22.0);
        let ry = range(rng, 21.0, 26.0);
        let eye_dx = range(rng, 6.5, 9.5);
        let eye_y = cy - ry * range(rng, 0.2, 0.32);
        let eye_r = range(rng, 2.1, 3.2);
        let mouth_y = cy + ry * range(rng, 0.4, 0.52);
        let mouth_w = range(rng, 5.5, 9.0);
        let mouth_h = range(rng, 1.1, 1.9);
        let brow_y = eye_y - eye_r - range(rng, 2.0, 4.0);
        let brow_len = range(rng, 3.5, 5.5);
        let n_freckles = rng.random_range(3..6usize);
        let mut freckles = Vec::new();
        for _ in 0..n_freckles {
            let ang = range(rng, 0.0, std::f32::consts::TAU);
            let rad = range(rng, 0.25, 0.8);
            let fx = cx + ang.cos() * rad * rx;
            let fy = cy + ang.sin() * rad * ry;
            let fr = range(rng, 0.9, 2.2);
            let col = [range(rng, -0.6, 0.6), range(rng, -0.6, 0.6), range(rng, -0.6, 0.6)];
            freckles.push((fx, fy, fr, col));
        }
        Face {
            bg,
            skin,
            feature,
            mouth_color,
            cx,
            cy,
            rx,
            ry,
            eye_dx,
            eye_y,
            eye_r,
            mouth_y,
            mouth_w,
            mouth_h,
            brow_y,
            brow_len,
            freckles,
        }
    }
}

/// Class deformation at ramp amplitude `a` in [0,1].
#[derive(Default)]
struct Deform {
    eye_scale: f32,     // added to 1.0
    eye_squint: f32,    // vertical-only shrink, added to 1.0 as (1 - squint)
    brow_raise: f32,    // pixels up
    brow_tilt: f32,     // +: inner ends down (anger), -: outer ends down (sadness)
    mouth_bow: f32,     // +: corners up (smile), -: corners down
    mouth_open: f32,    // interior ellipse vertical radius in pixels
    mouth_wide: f32,    // multiplier delta on mouth width
    mouth_rise: f32,    // pixels up
    mouth_skew: f32,    // left/right corner height difference
    wrinkle: f32,       // nose-wrinkle opacity
    tint: Color,        // additive skin tint
}

fn deform(class: Expression, a: f32) -> Deform {
    let mut d = Deform::default();
    match class {
        Expression::Anger => {
            d.brow_tilt = 2.6 * a;
            d.brow_raise = -1.0 * a;
            d.mouth_bow = -1.6 * a;
            d.mouth_wide = -0.25 * a;
            d.tint = [0.3 * a, -0.1 * a, -0.1 * a];
        }
        Expression::Disgust => {
            d.mouth_rise = 3.0 * a;
            d.mouth_skew = 2.4 * a;
            d.wrinkle = a;
            d.eye_squint = 0.35 * a;
            d.tint = [-0.05 * a, 0.15 * a, -0.05 * a];
        }
        Expression::Fear => {
            d.eye_scale = 0.55 * a;
            d.mouth_open = 3.6 * a;
            d.mouth_wide = -0.3 * a;
            d.brow_raise = 1.6 * a;
            d.tint = [0.12 * a, 0.12 * a, 0.12 * a];
        }
        Expression::Happiness => {
            d.mouth_bow = 2.6 * a;
            d.mouth_wide = 0.3 * a;
            d.eye_squint = 0.4 * a;
        }
        Expression::Sadness => {
            d.mouth_bow = -2.4 * a;
            d.brow_tilt = -2.2 * a;
            d.eye_squint = 0.2 * a;
            d.tint = [-0.1 * a, -0.1 * a, 0.25 * a];
        }
        Expression::Surprise => {
            d.eye_scale = 0.9 * a;
            d.brow_raise = 3.2 * a;
            d.mouth_open = 5.0 * a;
            d.mouth_wide = -0.4 * a;
        }
    }
    d
}

fn smoothstep(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

fn draw_frame(face: &Face, class: Expression, t: usize) -> Tensor<f32> {
    let a = smoothstep(t as f32 / (FRAMES - 1) as f32);
    let d = deform(class, a);

    let mut canvas = Canvas::new(face.bg);
    let skin = [
        (face.skin[0] + d.tint[0]).clamp(-1.0, 1.0),
        (face.skin[1] + d.tint[1]).clamp(-1.0, 1.0),
        (face.skin[2] + d.tint[2]).clamp(-1.0, 1.0),
    ];
    canvas.ellipse(face.cx, face.cy, face.rx, face.ry, skin, 1.0);
    for &(fx, fy, fr, col) in &face.freckles {
        canvas.ellipse(fx, fy, fr, fr, col, 0.85);
    }

    // Eyes.
    let er = face.eye_r * (1.0 + d.eye_scale);
    let ery = er * (1.0 - d.eye_squint);
    for side in [-1.0f32, 1.0] {
        let ex = face.cx + side * face.eye_dx;
        canvas.ellipse(ex, face.eye_y, er, ery.max(0.6), face.feature, 1.0);
    }

    // Brows: inner end toward the nose, tilt up/down by class.
    for side in [-1.0f32, 1.0] {
        let ex = face.cx + side * face.eye_dx;
        let by = face.brow_y - d.brow_raise;
        let inner = [ex - side * face.brow_len * 0.5, by + d.brow_tilt.max(0.0)];
        let outer = [
            ex + side * face.brow_len * 0.5,
            by + (-d.brow_tilt).max(0.0),
        ];
        canvas.capsule(inner, outer, 0.9, face.feature, 1.0);
    }

    // Mouth: open interior first, then the curved stroke.
    let mw = face.mouth_w * (1.0 + d.mouth_wide);
    let my = face.mouth_y - d.mouth_rise;
    if d.mouth_open > 0.05 {
        canvas.ellipse(face.cx, my + d.mouth_open * 0.5, mw * 0.8, d.mouth_open, face.mouth_color, 1.0);
    }
    let segments = 8;
    let mut prev: Option<[f32; 2]> = None;
    for i in 0..=segments {
        let u = i as f32 / segments as f32;
        let x = face.cx - mw + 2.0 * mw * u;
        let bow = d.mouth_bow * (4.0 * u * (1.0 - u) - 1.0);
        let skew = d.mouth_skew * (u - 0.5) * 2.0;
        let y = my + bow + skew;
        let p = [x, y];
        if let Some(q) = prev {
            canvas.capsule(q, p, face.mouth_h * 0.5 + 0.4, face.mouth_color, 1.0);
        }
        prev = Some(p);
    }

    // Nose wrinkles (disgust).
    if d.wrinkle > 0.01 {
        for (i, dy) in [-1.5f32, 1.5].iter().enumerate() {
            let y = face.cy - 2.0 + dy + i as f32;
            canvas.capsule(
                [face.cx - 3.0, y],
                [face.cx + 3.0, y - 1.0],
                0.7,
                face.feature,
                d.wrinkle,
            );
        }
    }

    canvas.into_tensor()
}

/// Generates `n_subjects * 6` records, one video per class per subject.
/// Bitwise deterministic in `(n_subjects, seed)`; frame 0 of every video is
/// the neutral face and equals the record's input image.
pub fn make_synthetic_dataset(n_subjects: usize, seed: u64) -> Vec<DatasetRecord> {
    assert!(n_subjects >= 1, "need at least one subject");
    let mut records = Vec::with_capacity(n_subjects * Expression::ALL.len());
    for s in 0..n_subjects {
        let mut rng = rng_for(seed, "synth-subject", s as u64);
        let face = Face::sample(&mut rng);
        let subject_id = format!("s{s:03}");
        for class in Expression::ALL {
            let mut frames = Vec::with_capacity(FRAMES);
            for t in 0..FRAMES {
                frames.push(draw_frame(&face, class, t));
            }
            let mut data = Vec::with_capacity(FRAMES * SIZE * SIZE * CHANNELS);
            for f in &frames {
                data.extend_from_slice(f.data());
            }
            let video =
                VideoTensor::new(Tensor::from_vec(&[FRAMES, SIZE, SIZE, CHANNELS], data))
                    .expect("synthetic frames stay in range");
            records.push(
                DatasetRecord::from_video(subject_id.clone(), class, video)
                    .expect("frame 0 is the input image"),
            );
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_neutral_first_frame() {
        let a = make_synthetic_dataset(2, 7);
        let b = make_synthetic_dataset(2, 7);
        assert_eq!(a.len(), 12);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.video.tensor().data(), rb.video.tensor().data());
            assert_eq!(
                ra.input_image.tensor().data(),
                ra.video.frame(0).tensor().data()
            );
        }
    }

    #[test]
    fn classes_diverge_over_time_but_share_frame0() {
        let recs = make_synthetic_dataset(1, 3);
        let f0: Vec<_> = recs.iter().map(|r| r.video.frame(0)).collect();
        for f in &f0[1..] {
            assert_eq!(f.tensor().data(), f0[0].tensor().data());
        }
        // Last frames must pairwise differ.
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                let a = recs[i].video.frame(31);
                let b = recs[j].video.frame(31);
                let l1: f32 = a
                    .tensor()
                    .data()
                    .iter()
                    .zip(b.tensor().data())
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                assert!(l1 > 1.0, "classes {i} and {j} too similar: {l1}");
            }
        }
    }
}
