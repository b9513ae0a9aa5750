use super::catalog::{PropertyClass, FRAME, HAND, TABLE_COLOR};
use super::state::{to_pixel, FoodLayout, Pose, SimState, DEPTH, X, Y};
use crate::geometry::BinaryMask;
use crate::image::RgbImage;
use crate::seed::splitmix64;

/// What the agent sees at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// 64×64 top-down view of the table and bowl (spoon not drawn).
    pub env: RgbImage,
    /// 32×32 crop centred on the spoon tip.
    pub hand: RgbImage,
    pub proprio: Pose,
    /// Ground-truth food mask of `env`.
    pub mask: BinaryMask,
}

/// Spoon drawn in the hand view, and the hand-crop side at the shallowest
/// and deepest poses.
const SPOON_COLOR: [u8; 3] = [168, 170, 178];
const SPOON_RADIUS: f64 = 3.5;
const HAND_SIDE_HIGH: f64 = 32.0;
const HAND_SIDE_LOW: f64 = 14.0;

fn hash_unit(seed: u64, x: usize, y: usize) -> f64 {
    let h = splitmix64(seed ^ splitmix64(((y as u64) << 32) | x as u64));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Brightness offset of a food pixel, in `[-1, 1]` before scaling by the
/// texture amplitude.
fn texture(state: &SimState, layout: &FoodLayout, x: usize, y: usize) -> f64 {
    let static_seed = crate::seed::derive(state.seed(), "texture");
    let (fx, fy) = (x as f64, y as f64);
    let ripple = || {
        let phase = state.step_index() as f64 * 0.9;
        (0.55 * (fx + 0.6 * fy) + phase).sin()
    };
    let nearest_item = || {
        layout
            .items
            .iter()
            .map(|&(ix, iy)| ((fx - ix).powi(2) + (fy - iy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let t = match state.food.property {
        PropertyClass::Granular => hash_unit(static_seed, x, y),
        PropertyClass::Liquid => ripple(),
        PropertyClass::SemiSolid => {
            let blotch = hash_unit(static_seed, x / 4, y / 4);
            0.8 * blotch + 0.2 * hash_unit(static_seed ^ 1, x, y)
        }
        PropertyClass::Solid => {
            let d = nearest_item();
            1.0 - 2.0 * (d / layout.item_radius).min(1.0)
        }
        PropertyClass::Mixture => {
            if nearest_item() <= layout.item_radius {
                -1.0
            } else {
                0.5 * ripple()
            }
        }
    };
    t.clamp(-1.0, 1.0)
}

/// Environment frame and its ground-truth mask.
pub fn render_env(state: &SimState) -> (RgbImage, BinaryMask) {
    let mask = state.food_mask();
    let layout = state.layout();
    let bowl = &state.bowl;
    let amp = f64::from(state.food.texture_amplitude);
    let mut img = RgbImage::filled(FRAME, FRAME, TABLE_COLOR);
    for y in 0..FRAME {
        for x in 0..FRAME {
            let (fx, fy) = (x as f64, y as f64);
            let color = if mask.get(x, y) {
                let offset = (texture(state, &layout, x, y) * amp).round() as i32;
                state
                    .food
                    .color
                    .map(|c| (i32::from(c) + offset).clamp(0, 255) as u8)
            } else if bowl.in_interior(fx, fy) {
                bowl.interior_color
            } else if bowl.in_wall(fx, fy) {
                bowl.rim_color
            } else {
                continue;
            };
            img.put(x, y, color);
        }
    }
    (img, mask)
}

/// Eye-in-hand view: a square crop of the environment frame centred on the
/// spoon tip that narrows as the spoon goes deeper, with the spoon bowl
/// drawn in the middle (showing food when loaded).
pub fn render_hand(state: &SimState, env: &RgbImage) -> RgbImage {
    let pose = state.pose();
    let (tx, ty) = (to_pixel(pose[X]), to_pixel(pose[Y]));
    let deep = ((pose[DEPTH] + 1.0) * 0.5).clamp(0.0, 1.0);
    let side = HAND_SIDE_HIGH + (HAND_SIDE_LOW - HAND_SIDE_HIGH) * deep;
    let mut hand = env.crop_resize(tx + 0.5 - side * 0.5, ty + 0.5 - side * 0.5, side, HAND);
    let c = (HAND as f64 - 1.0) * 0.5;
    let tint = if state.load() > 0.0 {
        state.food.color
    } else {
        SPOON_COLOR
    };
    for y in 0..HAND {
        for x in 0..HAND {
            let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            if d2 <= SPOON_RADIUS * SPOON_RADIUS {
                hand.put(x, y, tint);
            } else if d2 <= (SPOON_RADIUS + 1.0).powi(2) {
                hand.put(x, y, SPOON_COLOR);
            }
        }
    }
    hand
}

pub fn render(state: &SimState) -> Observation {
    let (env, mask) = render_env(state);
    let hand = render_hand(state, &env);
    Observation {
        env,
        hand,
        proprio: state.pose(),
        mask,
    }
}
