//! Question phrasing banks. Placeholders: `{a}`, `{b}` for object labels and
//! `{box}` for a rendered box.

use alloc::string::String;

use rand::Rng;

pub const LEFT_OF: &[&str] = &[
    "Is the {a} to the left of the {b}?",
    "From the camera's viewpoint, is the {a} on the left side of the {b}?",
    "Looking at the image, is the {a} left of the {b}?",
];

pub const RIGHT_OF: &[&str] = &[
    "Is the {a} to the right of the {b}?",
    "From the camera's viewpoint, is the {a} on the right side of the {b}?",
    "Looking at the image, is the {a} right of the {b}?",
];

pub const IN_FRONT_OF: &[&str] = &[
    "Is the {a} in front of the {b}?",
    "Is the {a} closer to the camera than the {b}?",
    "From this viewpoint, is the {a} in front of the {b}?",
];

pub const BEHIND: &[&str] = &[
    "Is the {a} behind the {b}?",
    "Is the {a} farther from the camera than the {b}?",
    "From this viewpoint, is the {a} behind the {b}?",
];

pub const WIDER: &[&str] = &[
    "Is the {a} wider than the {b}?",
    "Does the {a} have a larger width than the {b}?",
    "Comparing widths, is the {a} wider than the {b}?",
];

pub const NARROWER: &[&str] = &[
    "Is the {a} narrower than the {b}?",
    "Does the {a} have a smaller width than the {b}?",
    "Comparing widths, is the {a} narrower than the {b}?",
];

pub const LONGER: &[&str] = &[
    "Is the {a} longer than the {b}?",
    "Does the {a} have a larger length than the {b}?",
    "Comparing lengths, is the {a} longer than the {b}?",
];

pub const SHORTER_LENGTH: &[&str] = &[
    "Is the {a} shorter in length than the {b}?",
    "Does the {a} have a smaller length than the {b}?",
    "Comparing lengths, is the {a} shorter than the {b}?",
];

pub const TALLER: &[&str] = &[
    "Is the {a} taller than the {b}?",
    "Does the {a} have a larger height than the {b}?",
    "Comparing heights, is the {a} taller than the {b}?",
];

pub const SHORTER: &[&str] = &[
    "Is the {a} shorter than the {b}?",
    "Does the {a} have a smaller height than the {b}?",
    "Comparing heights, is the {a} shorter than the {b}?",
];

pub const PRESENCE: &[&str] = &[
    "Is there a {a} in the image?",
    "Can you see a {a} in this image?",
    "Does the image contain a {a}?",
];

pub const COUNTING: &[&str] = &[
    "How many {a} instances are visible in the image?",
    "Count the number of objects of type {a} in the image.",
    "How many objects labeled {a} can you see?",
];

pub const EGO_DISTANCE: &[&str] = &[
    "How far is the {a} from the camera?",
    "What is the distance between the camera and the {a}?",
    "How far away from the camera is the {a}?",
];

pub const MIN_DISTANCE: &[&str] = &[
    "What is the minimum distance between the {a} and the {b}?",
    "How close are the {a} and the {b} at their nearest points?",
    "What is the shortest distance between the {a} and the {b}?",
];

pub const CENTER_DISTANCE: &[&str] = &[
    "What is the distance between the centers of the {a} and the {b}?",
    "How far apart are the centers of the {a} and the {b}?",
    "Measure the center-to-center distance between the {a} and the {b}.",
];

pub const WIDTH: &[&str] = &[
    "How wide is the {a}?",
    "What is the width of the {a}?",
    "Estimate the width of the {a}.",
];

pub const LENGTH: &[&str] = &[
    "How long is the {a}?",
    "What is the length of the {a}?",
    "Estimate the length of the {a}.",
];

pub const HEIGHT: &[&str] = &[
    "How tall is the {a}?",
    "What is the height of the {a}?",
    "Estimate the height of the {a}.",
];

pub const GROUNDING_2D: &[&str] = &[
    "Provide the 2D bounding box of the {a}.",
    "Where is the {a} in the image? Answer with a 2D bounding box [x_min, y_min, x_max, y_max].",
    "Locate the {a} in the image with a 2D bounding box.",
];

pub const GROUNDING_3D: &[&str] = &[
    "Provide the 3D bounding box of the {a}.",
    "Output the 3D bounding box (center, dimensions, yaw) of the {a} in camera coordinates.",
    "What is the 3D bounding box of the {a}?",
];

pub const REFERRING: &[&str] = &[
    "Which object is located at {box}?",
    "What is the object inside the region {box}?",
    "Name the object found at {box}.",
];

pub fn pick<R: Rng + ?Sized>(bank: &[&'static str], rng: &mut R) -> &'static str {
    bank[rng.gen_range(0..bank.len())]
}

pub fn fill(template: &str, a: &str, b: Option<&str>) -> String {
    let out = template.replace("{a}", a);
    match b {
        Some(b) => out.replace("{b}", b),
        None => out,
    }
}

pub fn fill_box(template: &str, rendered: &str) -> String {
    template.replace("{box}", rendered)
}
