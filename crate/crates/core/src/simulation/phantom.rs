use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::operators::Image;

/// Geometric primitive in normalised coordinates: the image spans `[-1, 1]`
/// horizontally and vertically, `y` pointing up. Rotations are in degrees,
/// counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Primitive {
    Disk {
        center: [f64; 2],
        radius: f64,
        intensity: f64,
    },
    Ellipse {
        center: [f64; 2],
        radii: [f64; 2],
        #[serde(default)]
        rotation_deg: f64,
        intensity: f64,
    },
    Rectangle {
        center: [f64; 2],
        half_extents: [f64; 2],
        #[serde(default)]
        rotation_deg: f64,
        intensity: f64,
    },
    /// Two perpendicular bars of half length `arm_length` and full width `arm_width`.
    Cross {
        center: [f64; 2],
        arm_length: f64,
        arm_width: f64,
        #[serde(default)]
        rotation_deg: f64,
        intensity: f64,
    },
}

impl Primitive {
    pub fn intensity(&self) -> f64 {
        match *self {
            Primitive::Disk { intensity, .. }
            | Primitive::Ellipse { intensity, .. }
            | Primitive::Rectangle { intensity, .. }
            | Primitive::Cross { intensity, .. } => intensity,
        }
    }

    fn local(center: [f64; 2], rotation_deg: f64, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = rotation_deg.to_radians().sin_cos();
        let (du, dv) = (u - center[0], v - center[1]);
        (c * du + s * dv, -s * du + c * dv)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Primitive::Disk { center, radius, .. } => {
                let (du, dv) = (u - center[0], v - center[1]);
                du * du + dv * dv <= radius * radius
            }
            Primitive::Ellipse {
                center,
                radii,
                rotation_deg,
                ..
            } => {
                let (a, b) = Self::local(center, rotation_deg, u, v);
                (a / radii[0]).powi(2) + (b / radii[1]).powi(2) <= 1.0
            }
            Primitive::Rectangle {
                center,
                half_extents,
                rotation_deg,
                ..
            } => {
                let (a, b) = Self::local(center, rotation_deg, u, v);
                a.abs() <= half_extents[0] && b.abs() <= half_extents[1]
            }
            Primitive::Cross {
                center,
                arm_length,
                arm_width,
                rotation_deg,
                ..
            } => {
                let (a, b) = Self::local(center, rotation_deg, u, v);
                let half = 0.5 * arm_width;
                (a.abs() <= arm_length && b.abs() <= half)
                    || (b.abs() <= arm_length && a.abs() <= half)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let i = self.intensity();
        if !(0.0..=1.0).contains(&i) {
            return Err(CtError::config(format!("primitive intensity {i} outside [0, 1]")));
        }
        let sizes_ok = match *self {
            Primitive::Disk { radius, .. } => radius > 0.0,
            Primitive::Ellipse { radii, .. } => radii[0] > 0.0 && radii[1] > 0.0,
            Primitive::Rectangle { half_extents, .. } => {
                half_extents[0] > 0.0 && half_extents[1] > 0.0
            }
            Primitive::Cross {
                arm_length,
                arm_width,
                ..
            } => arm_length > 0.0 && arm_width > 0.0,
        };
        if !sizes_ok {
            return Err(CtError::config("primitive sizes must be positive"));
        }
        Ok(())
    }
}

/// A phantom painted element by element; later elements overwrite earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub size: usize,
    #[serde(default)]
    pub background: f64,
    pub elements: Vec<Primitive>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(CtError::config("phantom size must be positive"));
        }
        if self.elements.is_empty() {
            return Err(CtError::config("phantom needs at least one element"));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(CtError::config("phantom background outside [0, 1]"));
        }
        self.elements.iter().try_for_each(Primitive::validate)
    }

    /// Centred unit-intensity disk of normalised radius `radius`.
    pub fn disk(size: usize, radius: f64) -> Self {
        PhantomSpec {
            size,
            background: 0.0,
            elements: vec![Primitive::Disk {
                center: [0.0, 0.0],
                radius,
                intensity: 1.0,
            }],
        }
    }

    /// Test object with a soft-tissue body, homogeneous masses of different
    /// contrast, dense bone-like and metal-like inserts, and a thin cross.
    pub fn synthetic(size: usize) -> Self {
        // Cross arms about two pixels wide regardless of resolution.
        let thin = (4.0 / size as f64).max(0.02);
        PhantomSpec {
            size,
            background: 0.0,
            elements: vec![
                Primitive::Ellipse {
                    center: [0.0, 0.0],
                    radii: [0.85, 0.7],
                    rotation_deg: 0.0,
                    intensity: 0.25,
                },
                Primitive::Ellipse {
                    center: [-0.4, 0.2],
                    radii: [0.2, 0.14],
                    rotation_deg: 30.0,
                    intensity: 0.45,
                },
                Primitive::Disk {
                    center: [0.35, 0.3],
                    radius: 0.12,
                    intensity: 0.6,
                },
                Primitive::Disk {
                    center: [0.05, -0.35],
                    radius: 0.08,
                    intensity: 0.35,
                },
                Primitive::Rectangle {
                    center: [-0.35, -0.3],
                    half_extents: [0.16, 0.06],
                    rotation_deg: -20.0,
                    intensity: 0.9,
                },
                Primitive::Disk {
                    center: [0.5, -0.2],
                    radius: 0.04,
                    intensity: 1.0,
                },
                Primitive::Cross {
                    center: [0.0, 0.2],
                    arm_length: 0.14,
                    arm_width: thin,
                    rotation_deg: 0.0,
                    intensity: 0.75,
                },
            ],
        }
    }

    /// Random overlapping ellipses with uniform intensities inside a disk-shaped
    /// support, in the style of the COULE collection.
    pub fn coule_like(size: usize, seed: u64, count: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut elements = vec![Primitive::Ellipse {
            center: [0.0, 0.0],
            radii: [0.9, 0.9 * rng.random_range(0.75..1.0)],
            rotation_deg: rng.random_range(0.0..180.0),
            intensity: rng.random_range(0.1..0.3),
        }];
        for _ in 0..count {
            let r = rng.random_range(0.0..0.55);
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            elements.push(Primitive::Ellipse {
                center: [r * t.cos(), r * t.sin()],
                radii: [rng.random_range(0.04..0.25), rng.random_range(0.04..0.25)],
                rotation_deg: rng.random_range(0.0..180.0),
                intensity: rng.random_range(0.2..1.0),
            });
        }
        PhantomSpec {
            size,
            background: 0.0,
            elements,
        }
    }
}

/// Rasterises the spec at pixel centres, painting elements in order.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Image> {
    spec.validate()?;
    let n = spec.size;
    let inv = 1.0 / n as f64;
    Ok(Image::from_fn(n, n, 1.0, |r, c| {
        let u = (2 * c + 1) as f64 * inv - 1.0;
        let v = 1.0 - (2 * r + 1) as f64 * inv;
        spec.elements
            .iter()
            .rev()
            .find(|e| e.contains(u, v))
            .map_or(spec.background, Primitive::intensity)
    }))
}
