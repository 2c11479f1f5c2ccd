use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::prompt::tokenize;
use crate::scenes::{ClassRole, Image, NamedColor, SceneWorld};

/// Joint image/text embedding. Both methods return unit vectors of
/// length [`Embedder::dim`].
pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    fn embed_image(&self, image: &Image) -> Result<Vec<f64>>;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>>;
}

pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Backend(
            "embedding has zero or non-finite norm".to_string(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weight of the constant concept shared by every input; keeps texts
/// without any known word embeddable.
const BIAS_WEIGHT: f64 = 0.05;

/// Embedder over a small set of color concepts. Images map to a soft
/// color histogram, texts to a bag of concept words; both go through
/// the same seeded Gaussian projection.
#[derive(Debug, Clone)]
pub struct LexiconEmbedder {
    concepts: Vec<NamedColor>,
    lexicon: BTreeMap<String, usize>,
    /// `dim × (concepts + 1)`, row-major.
    projection: Vec<f64>,
    dim: usize,
    temperature: f64,
}

impl LexiconEmbedder {
    pub fn new(
        concepts: Vec<NamedColor>,
        lexicon: &[(&str, &str)],
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if concepts.is_empty() || dim == 0 {
            return Err(invalid(
                "embedder needs at least one concept and a positive dimension",
            ));
        }
        let mut map = BTreeMap::new();
        for (word, concept) in lexicon {
            let k = concepts
                .iter()
                .position(|c| c.name == *concept)
                .ok_or_else(|| {
                    invalid(alloc::format!(
                        "lexicon maps {word:?} to unknown concept {concept:?}"
                    ))
                })?;
            map.insert(word.to_lowercase(), k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..dim * (concepts.len() + 1))
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            concepts,
            lexicon: map,
            projection,
            dim,
            temperature: 0.005,
        })
    }

    /// Concepts are the palette colors and the background classes; each
    /// concept name maps to itself, plus a few weather and material words.
    pub fn for_world(world: &SceneWorld, dim: usize, seed: u64) -> Result<Self> {
        let mut concepts = world.palette.clone();
        for class in &world.classes {
            if let ClassRole::Background { color, .. } = &class.role {
                concepts.push(NamedColor {
                    name: class.name.clone(),
                    rgb: *color,
                });
            }
        }
        let names: Vec<String> = concepts.iter().map(|c| c.name.clone()).collect();
        let mut lexicon: Vec<(&str, &str)> =
            names.iter().map(|n| (n.as_str(), n.as_str())).collect();
        let extras = [
            ("night", "black"),
            ("snowfall", "white"),
            ("snow", "white"),
            ("fog", "white"),
            ("wooden", "brown"),
            ("golden", "yellow"),
        ];
        for (w, c) in extras {
            if names.iter().any(|n| n == c) {
                lexicon.push((w, c));
            }
        }
        Self::new(concepts, &lexicon, dim, seed)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(invalid("temperature must be positive"));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn concepts(&self) -> &[NamedColor] {
        &self.concepts
    }

    /// Concept histogram of an image (sums to one).
    pub fn image_histogram(&self, image: &Image) -> Vec<f64> {
        let k = self.concepts.len();
        let mut hist = alloc::vec![0.0; k];
        let mut w = alloc::vec![0.0; k];
        for px in image.data.chunks_exact(3) {
            for (j, c) in self.concepts.iter().enumerate() {
                let d2: f64 = (0..3).map(|i| (px[i] - c.rgb[i]).powi(2)).sum();
                w[j] = -d2 / self.temperature;
            }
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = w.iter().map(|v| (v - max).exp()).sum();
            for j in 0..k {
                hist[j] += (w[j] - max).exp() / z;
            }
        }
        let n = image.pixels().max(1) as f64;
        hist.iter_mut().for_each(|h| *h /= n);
        hist
    }

    /// Concept histogram of a text; all zeros if no word is known.
    pub fn text_histogram(&self, text: &str) -> Vec<f64> {
        let mut hist = alloc::vec![0.0; self.concepts.len()];
        let mut hits = 0usize;
        for word in tokenize(text) {
            if let Some(&k) = self.lexicon.get(&word.to_lowercase()) {
                hist[k] += 1.0;
                hits += 1;
            }
        }
        if hits > 0 {
            hist.iter_mut().for_each(|h| *h /= hits as f64);
        }
        hist
    }

    fn project(&self, hist: &[f64]) -> Result<Vec<f64>> {
        let cols = self.concepts.len() + 1;
        let v = (0..self.dim)
            .map(|r| {
                let row = &self.projection[r * cols..(r + 1) * cols];
                dot(&row[..cols - 1], hist) + row[cols - 1] * BIAS_WEIGHT
            })
            .collect();
        normalize(v)
    }
}

impl Embedder for LexiconEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &Image) -> Result<Vec<f64>> {
        self.project(&self.image_histogram(image))
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        self.project(&self.text_histogram(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn outputs_are_unit_vectors() {
        let world = SceneWorld::standard(16);
        let e = LexiconEmbedder::for_world(&world, 32, 3).unwrap();
        let img = Image::filled(16, 16, [0.2, 0.5, 0.9]);
        assert!((norm(&e.embed_image(&img).unwrap()) - 1.0).abs() < 1e-5);
        assert!((norm(&e.embed_text("a photo of a red ball").unwrap()) - 1.0).abs() < 1e-5);
        assert!((norm(&e.embed_text("nothing known here").unwrap()) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn matching_image_and_text_are_similar() {
        let world = SceneWorld::standard(16);
        let e = LexiconEmbedder::for_world(&world, 32, 3).unwrap();
        let red = Image::filled(8, 8, world.palette_color("red").unwrap());
        let r = e.embed_image(&red).unwrap();
        let same = dot(&r, &e.embed_text("a red thing").unwrap());
        let other = dot(&r, &e.embed_text("a blue thing").unwrap());
        assert!(same > 0.9, "{same}");
        assert!(same > other + 0.5);
    }

    #[test]
    fn projection_is_seed_determined() {
        let world = SceneWorld::standard(16);
        let a = LexiconEmbedder::for_world(&world, 16, 9).unwrap();
        let b = LexiconEmbedder::for_world(&world, 16, 9).unwrap();
        let c = LexiconEmbedder::for_world(&world, 16, 10).unwrap();
        assert_eq!(
            a.embed_text("green").unwrap(),
            b.embed_text("green").unwrap()
        );
        assert_ne!(
            a.embed_text("green").unwrap(),
            c.embed_text("green").unwrap()
        );
    }

    #[test]
    fn unknown_concept_in_lexicon_is_rejected() {
        let concepts = alloc::vec![NamedColor {
            name: "red".into(),
            rgb: [1.0, 0.0, 0.0]
        }];
        assert!(LexiconEmbedder::new(concepts, &[("crimson", "scarlet")], 4, 0).is_err());
    }
}
