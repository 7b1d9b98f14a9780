use sketchrec::sketch_io::load_corpus;
use sketchrec::synth::{glyph_corpus, render_glyph, write_corpus, GlyphFamily, STROKE_WIDTH};

fn iou(a: &[f32], b: &[f32]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x > 0.0 && **y > 0.0).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x > 0.0 || **y > 0.0).count();
    inter as f64 / union.max(1) as f64
}

#[test]
fn first_160_families_are_distinct() {
    let res = 64;
    let masks: Vec<Vec<f32>> = (0..160)
        .map(|f| render_glyph(GlyphFamily::new(f).template(), res, STROKE_WIDTH * res as f64).into_data())
        .collect();
    let mut worst = 0.0f64;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            worst = worst.max(iou(&masks[i], &masks[j]));
        }
    }
    assert!(worst < 0.9, "max pairwise IoU {worst}");
}

#[test]
fn instances_vary_but_stay_closer_to_their_family() {
    let res = 64;
    let corpus = glyph_corpus(6, 5, res, 3).unwrap();
    let a = corpus.category(0)[0].raster.data();
    let b = corpus.category(0)[1].raster.data();
    assert_ne!(a, b);
    let own = render_glyph(GlyphFamily::new(0).template(), res, STROKE_WIDTH * res as f64);
    let own_iou = iou(a, own.data());
    for f in 1..6 {
        let other = render_glyph(GlyphFamily::new(f).template(), res, STROKE_WIDTH * res as f64);
        assert!(iou(a, other.data()) < own_iou);
    }
}

#[test]
fn written_corpus_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = glyph_corpus(3, 4, 48, 9).unwrap();
    write_corpus(&corpus, dir.path()).unwrap();
    let loaded = load_corpus(dir.path(), 48).unwrap();
    assert_eq!(loaded.categories(), corpus.categories());
    for (x, y) in loaded.iter().zip(corpus.iter()) {
        assert_eq!((&x.id, &x.raster), (&y.id, &y.raster));
    }
}
