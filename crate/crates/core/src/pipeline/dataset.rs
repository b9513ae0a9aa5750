use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{ImrlError, Result};
use crate::image::RgbImage;
use crate::seed;
use crate::simworld::{food_catalog, make_env, render_env, BowlShape, BowlSpec, FoodSpec, PropertyClass, HAND, HOME, TABLE_COLOR};

/// Side of every encoder input image.
pub const INPUT_SIDE: usize = HAND;
pub const INPUT_DIM: usize = INPUT_SIDE * INPUT_SIDE * 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub foods: Vec<FoodSpec>,
    /// Images generated per property class, spread over the class's foods.
    pub per_class: usize,
    /// Fullness labels to draw from.
    pub fills: Vec<f64>,
    /// Share of images that are close-up crops around a food pixel.
    pub closeup_fraction: f64,
    /// Train and validation shares; the rest is test.
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            foods: food_catalog(),
            per_class: 200,
            fills: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            closeup_fraction: 0.1,
            train_fraction: 0.7,
            val_fraction: 0.15,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let classes: Vec<PropertyClass> = PropertyClass::ALL
            .into_iter()
            .filter(|p| self.foods.iter().any(|f| f.property == *p))
            .collect();
        if classes.len() < 2 {
            return Err(ImrlError::config("foods", "need foods from at least 2 property classes"));
        }
        for p in &classes {
            if self.foods.iter().filter(|f| f.property == *p).count() < 2 {
                return Err(ImrlError::config("foods", format!("property class {p} needs at least 2 foods")));
            }
        }
        if self.per_class < 2 {
            return Err(ImrlError::config("images_per_class", "must be >= 2"));
        }
        if self.fills.is_empty() || self.fills.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(ImrlError::config("fills", "need at least one fill level in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.closeup_fraction) {
            return Err(ImrlError::config("closeup_fraction", "must be in [0, 1]"));
        }
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t > 0.0 && v >= 0.0 && t + v <= 1.0) {
            return Err(ImrlError::config("train_fraction", "split fractions must be positive and sum to <= 1"));
        }
        Ok(())
    }

    /// Food names; the position of a name is its type label.
    pub fn type_names(&self) -> Vec<String> {
        self.foods.iter().map(|f| f.name.clone()).collect()
    }
}

/// Labelled food images at encoder resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FoodImageDataset {
    pub images: Vec<RgbImage>,
    pub type_labels: Vec<usize>,
    pub property_labels: Vec<usize>,
    pub fullness: Vec<f64>,
    pub splits: Vec<Split>,
    pub type_names: Vec<String>,
}

impl FoodImageDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Writes `images/NNNNN.ppm`, `labels.csv` and `types.txt` under `dir`.
    pub fn save(&self, dir: &Path, config_hash: &str) -> Result<()> {
        let images = dir.join("images");
        fs::create_dir_all(&images).map_err(|e| ImrlError::io(&images, e))?;
        for (i, img) in self.images.iter().enumerate() {
            let p = images.join(format!("{i:05}.ppm"));
            fs::write(&p, img.to_ppm()).map_err(|e| ImrlError::io(&p, e))?;
        }
        let p = dir.join("types.txt");
        let names: String = self.type_names.iter().map(|n| format!("{n}\n")).collect();
        fs::write(&p, names).map_err(|e| ImrlError::io(&p, e))?;
        let p = dir.join("labels.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_error(&p, e))?;
        for i in 0..self.len() {
            w.serialize(LabelRow {
                file: format!("images/{i:05}.ppm"),
                type_label: self.type_labels[i],
                property_label: self.property_labels[i],
                fullness: self.fullness[i],
                split: self.splits[i],
                config_hash: config_hash.to_string(),
            })
            .map_err(|e| csv_error(&p, e))?;
        }
        w.flush().map_err(|e| ImrlError::io(&p, e))
    }

    pub fn load(dir: &Path) -> Result<FoodImageDataset> {
        let p = dir.join("types.txt");
        let names = fs::read_to_string(&p).map_err(|e| ImrlError::io(&p, e))?;
        let mut ds = FoodImageDataset {
            images: Vec::new(),
            type_labels: Vec::new(),
            property_labels: Vec::new(),
            fullness: Vec::new(),
            splits: Vec::new(),
            type_names: names.lines().map(str::to_string).collect(),
        };
        let p = dir.join("labels.csv");
        let mut r = csv::Reader::from_path(&p).map_err(|e| csv_error(&p, e))?;
        for row in r.deserialize::<LabelRow>() {
            let row = row.map_err(|e| csv_error(&p, e))?;
            if row.type_label >= ds.type_names.len() || row.property_label >= PropertyClass::ALL.len() {
                return Err(ImrlError::Label(format!("{}: label out of range", row.file)));
            }
            let ip = dir.join(&row.file);
            let bytes = fs::read(&ip).map_err(|e| ImrlError::io(&ip, e))?;
            ds.images.push(RgbImage::from_ppm(&bytes)?);
            ds.type_labels.push(row.type_label);
            ds.property_labels.push(row.property_label);
            ds.fullness.push(row.fullness);
            ds.splits.push(row.split);
        }
        Ok(ds)
    }
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    file: String,
    type_label: usize,
    property_label: usize,
    fullness: f64,
    split: Split,
    config_hash: String,
}

fn csv_error(path: &Path, e: csv::Error) -> ImrlError {
    ImrlError::Format {
        what: "csv",
        message: format!("{}: {e}", path.display()),
    }
}

/// Bowl colours are drawn at random. Some interiors are tinted by the table
/// to mimic see-through bowls.
fn random_bowl(rng: &mut seed::Rng) -> BowlSpec {
    let rim = [0; 3].map(|_: u8| rng.random_range(30..=240u8));
    let interior = if rng.random_bool(0.3) {
        let t = rng.random_range(0.5..0.9);
        std::array::from_fn(|c| (t * f64::from(TABLE_COLOR[c]) + (1.0 - t) * f64::from(rim[c])) as u8)
    } else {
        rim.map(|c| (f64::from(c) * rng.random_range(0.8..0.95)) as u8)
    };
    let (shape, radius) = if rng.random_bool(0.7) {
        (BowlShape::Circle, rng.random_range(15.0..=24.0))
    } else {
        (BowlShape::Square, rng.random_range(13.0..=20.0))
    };
    BowlSpec {
        name: "dataset".into(),
        shape,
        radius,
        wall: rng.random_range(2.0..=3.0),
        rim_color: rim,
        interior_color: interior,
        center: (31.5, 31.5),
    }
}

/// Encoder view of a full environment frame.
pub fn env_input_image(env: &RgbImage) -> RgbImage {
    env.downsample2()
}

/// Appends the encoder input vector of a 32×32 image (centred to [-0.5, 0.5]).
pub fn push_input(img: &RgbImage, out: &mut Vec<f64>) {
    out.extend(img.as_raw().iter().map(|&v| f64::from(v) / 255.0 - 0.5));
}

fn augment(env: &RgbImage, food_pixels: &[(usize, usize)], closeup_fraction: f64, rng: &mut seed::Rng) -> RgbImage {
    let frame = env.width() as f64;
    let mut img = if rng.random_bool(closeup_fraction) && !food_pixels.is_empty() {
        let (cx, cy) = food_pixels[rng.random_range(0..food_pixels.len())];
        let side = rng.random_range(14.0..=32.0);
        env.crop_resize(cx as f64 + 0.5 - side / 2.0, cy as f64 + 0.5 - side / 2.0, side, INPUT_SIDE)
    } else if rng.random_bool(0.5) {
        env_input_image(env)
    } else {
        let side = rng.random_range(54.0..=frame);
        let x0 = rng.random_range(0.0..=frame - side);
        let y0 = rng.random_range(0.0..=frame - side);
        env.crop_resize(x0, y0, side, INPUT_SIDE)
    };
    if rng.random_bool(0.5) {
        img = img.flip_horizontal();
    }
    let jitter = [0; 3].map(|_: i32| rng.random_range(-10..=10));
    img = img.jitter(jitter);
    if rng.random_bool(0.3) {
        img = img.box_blur3();
    }
    img
}

/// Renders a labelled image dataset of random bowls holding the given foods.
pub fn gen_food_dataset(spec: &DatasetSpec, seed: u64) -> Result<FoodImageDataset> {
    spec.validate()?;
    let mut ds = FoodImageDataset {
        images: Vec::new(),
        type_labels: Vec::new(),
        property_labels: Vec::new(),
        fullness: Vec::new(),
        splits: Vec::new(),
        type_names: spec.type_names(),
    };
    let mut split_rng = seed::rng(seed::derive(seed, "dataset-split"));
    for class in PropertyClass::ALL {
        let members: Vec<usize> = (0..spec.foods.len()).filter(|&i| spec.foods[i].property == class).collect();
        if members.is_empty() {
            continue;
        }
        let first = ds.len();
        for j in 0..spec.per_class {
            let type_label = members[j % members.len()];
            let food = &spec.foods[type_label];
            let mut rng = seed::rng(seed::derive_indexed(seed, "dataset-image", (first + j) as u64));
            let fill = spec.fills[rng.random_range(0..spec.fills.len())];
            let mut state = make_env(random_bowl(&mut rng), food.clone(), fill, rng.random())?;
            // Advance the texture clock so liquid ripples vary between images.
            for _ in 0..rng.random_range(0..8) {
                state = state.step(&HOME)?.0;
            }
            let (env, mask) = render_env(&state);
            let pixels: Vec<(usize, usize)> = mask.food_pixels().collect();
            ds.images.push(augment(&env, &pixels, spec.closeup_fraction, &mut rng));
            ds.type_labels.push(type_label);
            ds.property_labels.push(class.index());
            ds.fullness.push(fill);
        }
        let mut order: Vec<usize> = (first..ds.len()).collect();
        order.shuffle(&mut split_rng);
        let n = order.len() as f64;
        let n_train = (n * spec.train_fraction).round() as usize;
        let n_val = (n * spec.val_fraction).round() as usize;
        ds.splits.resize(ds.len(), Split::Test);
        for (rank, &i) in order.iter().enumerate() {
            ds.splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(ds)
}

/// Random permutation of `frames`. `true_positions[i]` is the original
/// index of shuffled frame `i`.
pub fn shuffle_frames<T: Clone>(frames: &[T], seed: u64) -> Result<(Vec<T>, Vec<usize>)> {
    if frames.len() < 2 {
        return Err(ImrlError::config("temporal_frames", "need at least 2 frames to shuffle"));
    }
    let mut positions: Vec<usize> = (0..frames.len()).collect();
    positions.shuffle(&mut seed::rng(seed));
    let shuffled = positions.iter().map(|&p| frames[p].clone()).collect();
    Ok((shuffled, positions))
}
