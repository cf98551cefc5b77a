use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{StepEntry, TrajectoryRecord};
use crate::env::{EnvConfig, TeamId};
use crate::error::{Error, Result};

type Rgb = [u8; 3];

const BACKGROUND: Rgb = [245, 245, 240];
const FORT: Rgb = [185, 185, 205];
const FORT_EDGE: Rgb = [90, 90, 120];
const GUARD: Rgb = [40, 160, 60];
const ATTACKER: Rgb = [205, 50, 50];
const INK: Rgb = [20, 20, 20];
const RING: Rgb = [235, 190, 0];

/// Canvas size and attention-ring geometry. Ring radii are in arena units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderStyle {
    pub width: u32,
    pub height: u32,
    /// Ring radius for attention weight 0.
    pub ring_min: f64,
    /// Ring radius for attention weight 1.
    pub ring_max: f64,
    /// Ring stroke width in pixels.
    pub ring_width: f64,
    /// Opacity of laser sectors.
    pub laser_alpha: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle { width: 480, height: 480, ring_min: 0.05, ring_max: 0.16, ring_width: 2.0, laser_alpha: 0.3 }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("render.width", "canvas must be at least 1×1"));
        }
        if !(self.ring_min >= 0.0 && self.ring_max >= self.ring_min) {
            return Err(Error::config("render.ring_max", "need 0 <= ring_min <= ring_max"));
        }
        if !(self.ring_width > 0.0) {
            return Err(Error::config("render.ring_width", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.laser_alpha) {
            return Err(Error::config("render.laser_alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `r_min + w·(r_max - r_min)`.
pub fn ring_radius(weight: f64, style: &RenderStyle) -> f64 {
    style.ring_min + weight * (style.ring_max - style.ring_min)
}

struct Canvas {
    w: u32,
    h: u32,
    px: Vec<u8>,
    /// Pixels per arena unit.
    scale: f64,
    half: f64,
}

impl Canvas {
    fn new(style: &RenderStyle, env: &EnvConfig) -> Self {
        let half = env.arena_half_extent;
        let scale = style.width.min(style.height) as f64 / (2.0 * half);
        let mut px = Vec::with_capacity((style.width * style.height * 3) as usize);
        for _ in 0..style.width * style.height {
            px.extend_from_slice(&BACKGROUND);
        }
        Canvas { w: style.width, h: style.height, px, scale, half }
    }

    /// Arena coordinates of the centre of pixel `(i, j)`, with `y` pointing up.
    fn world(&self, i: u32, j: u32) -> [f64; 2] {
        [(i as f64 + 0.5) / self.scale - self.half, self.half - (j as f64 + 0.5) / self.scale]
    }

    fn blend(&mut self, i: u32, j: u32, c: Rgb, alpha: f64) {
        let k = ((j * self.w + i) * 3) as usize;
        for ch in 0..3 {
            let old = self.px[k + ch] as f64;
            self.px[k + ch] = (old + alpha * (c[ch] as f64 - old)).round() as u8;
        }
    }

    /// Visits every pixel whose centre lies within `radius` of `center`.
    fn each_near(&self, center: [f64; 2], radius: f64, mut f: impl FnMut(u32, u32, [f64; 2])) {
        let to_px = |v: f64| v * self.scale;
        let ci = to_px(center[0] + self.half);
        let cj = to_px(self.half - center[1]);
        let r = to_px(radius) + 1.0;
        let i0 = (ci - r).floor().max(0.0) as u32;
        let j0 = (cj - r).floor().max(0.0) as u32;
        let i1 = ((ci + r).ceil().max(0.0) as u32).min(self.w);
        let j1 = ((cj + r).ceil().max(0.0) as u32).min(self.h);
        for j in j0..j1 {
            for i in i0..i1 {
                let p = self.world(i, j);
                if (p[0] - center[0]).hypot(p[1] - center[1]) <= radius {
                    f(i, j, p);
                }
            }
        }
    }

    fn disc(&mut self, center: [f64; 2], radius: f64, c: Rgb) {
        let mut hits = Vec::new();
        self.each_near(center, radius, |i, j, _| hits.push((i, j)));
        for (i, j) in hits {
            self.blend(i, j, c, 1.0);
        }
    }

    /// Annulus of the given outer radius and pixel stroke width.
    fn ring(&mut self, center: [f64; 2], radius: f64, stroke_px: f64, c: Rgb) {
        let inner = (radius - stroke_px / self.scale).max(0.0);
        let mut hits = Vec::new();
        self.each_near(center, radius, |i, j, p| {
            if (p[0] - center[0]).hypot(p[1] - center[1]) >= inner {
                hits.push((i, j));
            }
        });
        for (i, j) in hits {
            self.blend(i, j, c, 1.0);
        }
    }

    fn segment(&mut self, a: [f64; 2], b: [f64; 2], c: Rgb) {
        let len_px = ((b[0] - a[0]).hypot(b[1] - a[1]) * self.scale).ceil().max(1.0) as usize;
        for s in 0..=len_px {
            let t = s as f64 / len_px as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let i = ((p[0] + self.half) * self.scale).floor();
            let j = ((self.half - p[1]) * self.scale).floor();
            if i >= 0.0 && j >= 0.0 && (i as u32) < self.w && (j as u32) < self.h {
                self.blend(i as u32, j as u32, c, 1.0);
            }
        }
    }

    fn sector(&mut self, apex: [f64; 2], heading: f64, half_angle: f64, range: f64, c: Rgb, alpha: f64) {
        let mut hits = Vec::new();
        self.each_near(apex, range, |i, j, p| {
            let off = crate::env::wrap_angle((p[1] - apex[1]).atan2(p[0] - apex[0]) - heading).abs();
            if off <= half_angle {
                hits.push((i, j));
            }
        });
        for (i, j) in hits {
            self.blend(i, j, c, alpha);
        }
    }
}

fn team_color(team: TeamId) -> Rgb {
    match team {
        TeamId::Guard => GUARD,
        TeamId::Attacker => ATTACKER,
    }
}

/// Raw RGB pixels (row-major, top row first) of the frame for `step`: the world after
/// the step, laser sectors of that step's shots, and the focus agent's attention rings.
pub fn render_frame(record: &TrajectoryRecord, step: &StepEntry, style: &RenderStyle) -> Vec<u8> {
    let env = &record.header.env;
    let mut c = Canvas::new(style, env);

    c.disc(env.fort_center, env.fort_radius, FORT);
    c.ring(env.fort_center, env.fort_radius, 2.0, FORT_EDGE);

    let prev_alive = |id: usize| step.actions[id].is_some();
    for (agent, action) in step.state.agents.iter().zip(&step.actions) {
        if matches!(action, Some(a) if a.shoot) && prev_alive(agent.id) {
            c.sector(agent.position, agent.orientation, env.laser_half_angle, env.laser_range, team_color(agent.team), style.laser_alpha);
        }
    }

    for agent in step.state.agents.iter().filter(|a| a.alive) {
        c.disc(agent.position, env.agent_radius, team_color(agent.team));
        let tip = [
            agent.position[0] + 1.6 * env.agent_radius * agent.orientation.cos(),
            agent.position[1] + 1.6 * env.agent_radius * agent.orientation.sin(),
        ];
        c.segment(agent.position, tip, INK);
    }

    if let Some(att) = &step.attention {
        let pos = |id: usize| step.state.agents[id].position;
        for (&id, &w) in att.opponent_ids.iter().zip(&att.psi) {
            c.ring(pos(id), ring_radius(w, style), style.ring_width, RING);
        }
        if let Some(phi) = att.phi.last() {
            for (&id, &w) in att.teammate_ids.iter().zip(phi) {
                c.ring(pos(id), ring_radius(w, style), style.ring_width, RING);
            }
        }
    }
    if let Some(f) = record.header.focus_agent {
        let a = &step.state.agents[f];
        if a.alive {
            c.disc(a.position, 2.5 / c.scale, INK);
        }
    }
    c.px
}

fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(rgb).expect("in-memory PNG data");
    }
    out
}

/// Writes `frame_00001.png`, ... (one per step) and `index.tsv` into `out_dir`. Frames
/// are rendered on scoped threads; the bytes do not depend on the thread count.
pub fn render_frames(record: &TrajectoryRecord, style: &RenderStyle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    style.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(record.steps.len().max(1));
    let chunk = record.steps.len().div_ceil(threads).max(1);
    let images: Vec<Vec<u8>> = std::thread::scope(|scope| {
        let handles: Vec<_> = record
            .steps
            .chunks(chunk)
            .map(|steps| {
                scope.spawn(move || {
                    steps.iter().map(|s| encode_png(style.width, style.height, &render_frame(record, s, style))).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("render thread panicked")).collect()
    });
    let mut paths = Vec::with_capacity(images.len());
    let mut index = String::from("frame\tt\tfile\n");
    for (k, (bytes, s)) in images.iter().zip(&record.steps).enumerate() {
        let name = format!("frame_{:05}.png", k + 1);
        let path = out_dir.join(&name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        index.push_str(&format!("{}\t{}\t{}\n", k + 1, s.t, name));
        paths.push(path);
    }
    let index_path = out_dir.join("index.tsv");
    std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;
    Ok(paths)
}
