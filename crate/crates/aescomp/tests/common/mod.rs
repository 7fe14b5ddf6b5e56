//! Synthetic corpora shared by the integration tests.
//!
//! Images are 64x64. The top half carries the "global" bit `g` as its
//! brightness. In the bottom half, columns `x % 4 in {1, 2}` carry the "scene"
//! bit `s`; every other bottom pixel is a fixed gray.
//!
//! The content stub runs at input size 8. Resizing 64 to 8 with half-pixel
//! centers samples only columns and rows `8k + 3` and `8k + 4`, so the global
//! view never sees the scene columns. The scene stub runs at input size 16 and
//! samples `4k + 1` and `4k + 2`, so it sees both bits.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use aescomp::imageio::save_png;
use aescomp_core::{Label, RawImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIDE: u32 = 64;
pub const CONTENT_BACKBONE: &str = "stub:7:16:8";
pub const SCENE_BACKBONE: &str = "stub:11:16:16";

fn is_scene_column(x: u32) -> bool {
    matches!(x % 4, 1 | 2)
}

/// One fixture image. `jitter` in [0, 1) perturbs both signal levels without
/// crossing between classes.
pub fn render(g: bool, s: bool, jitter_g: f64, jitter_s: f64) -> RawImage {
    let top = if g { 170.0 + 60.0 * jitter_g } else { 30.0 + 60.0 * jitter_g } as u8;
    let scene = if s { 200.0 + 50.0 * jitter_s } else { 5.0 + 50.0 * jitter_s } as u8;
    RawImage::from_fn(SIDE, SIDE, |x, y| {
        if y < SIDE / 2 {
            [top, top / 2, 255 - top]
        } else if is_scene_column(x) {
            [scene, 255 - scene, scene / 3]
        } else {
            [128, 128, 128]
        }
    })
    .unwrap()
}

pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub labels: Vec<Label>,
}

/// Writes `per_cell` images for each `(g, s)` combination plus a manifest.
/// `label_of` decides the class; `split` gives every image's split, if any.
pub fn write_corpus(
    dir: &Path,
    name: &str,
    per_cell: usize,
    seed: u64,
    label_of: impl Fn(bool, bool) -> Label,
    split_of: impl Fn(usize) -> Option<&'static str>,
) -> Corpus {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("image_path,label,split\n");
    let mut labels = Vec::new();
    for rank in 0..per_cell {
        for (g, s) in [(false, false), (false, true), (true, false), (true, true)] {
            let img = render(g, s, rng.random::<f64>(), rng.random::<f64>());
            let path = dir.join(format!("{name}-{rank:03}-{}{}.png", g as u8, s as u8));
            save_png(&img, &path).unwrap();
            let label = label_of(g, s);
            labels.push(label);
            csv.push_str(&format!("{},{},{}\n", path.display(), label, split_of(rank).unwrap_or("")));
        }
    }
    let manifest = dir.join(format!("{name}.csv"));
    std::fs::write(&manifest, csv).unwrap();
    Corpus { dir: dir.to_path_buf(), manifest, labels }
}

pub fn xor_label(g: bool, s: bool) -> Label {
    if g ^ s {
        Label::High
    } else {
        Label::Low
    }
}

pub fn global_label(g: bool, _s: bool) -> Label {
    if g {
        Label::High
    } else {
        Label::Low
    }
}

/// 200 images, label `g XOR s`, first half of every cell in train.
pub fn parity_corpus(dir: &Path) -> Corpus {
    write_corpus(dir, "parity", 50, 2024, xor_label, |rank| Some(if rank < 25 { "train" } else { "test" }))
}
