//! Plan diagrams, impact heatmaps and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ExperimentGrid, GridCell, Provenance, SummaryMetrics};
use crate::plans::PlanId;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    pub colors: BTreeMap<PlanId, Rgb>,
    pub unvisited: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            colors: BTreeMap::from([
                (PlanId::IxScanA, [230, 126, 34]),
                (PlanId::IxScanB, [39, 174, 96]),
                (PlanId::CollScan, [241, 196, 15]),
                (PlanId::IxScanAB, [41, 128, 185]),
            ]),
            unvisited: [128, 128, 128],
        }
    }
}

impl Palette {
    pub fn color(&self, plan: PlanId) -> Result<Rgb> {
        self.colors
            .get(&plan)
            .copied()
            .ok_or_else(|| Error::MissingColor(plan.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapScale {
    pub r_max: f64,
    pub full: Rgb,
}

pub const DEFAULT_R_MAX: f64 = 4.0;

impl Default for HeatmapScale {
    fn default() -> Self {
        HeatmapScale {
            r_max: DEFAULT_R_MAX,
            full: [200, 0, 0],
        }
    }
}

impl HeatmapScale {
    pub fn color(&self, ratio: f64) -> Rgb {
        let t = if self.r_max <= 1.0 {
            if ratio > 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            ((ratio - 1.0) / (self.r_max - 1.0)).clamp(0.0, 1.0)
        };
        let mut out = WHITE;
        for (c, &f) in out.iter_mut().zip(&self.full) {
            *c = (255.0 + t * (f as f64 - 255.0)).round() as u8;
        }
        out
    }
}

/// Row-major RGB raster, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        self.pixels[y * self.width + x] = color;
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6 {} {} 255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn to_svg(&self, cell_size: usize) -> String {
        let (w, h) = (self.width * cell_size, self.height * cell_size);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" shape-rendering=\"crispEdges\">\n"
        );
        for y in 0..self.height {
            for x in 0..self.width {
                let [r, g, b] = self.get(x, y);
                let _ = writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell_size}\" height=\"{cell_size}\" fill=\"rgb({r},{g},{b})\"/>",
                    x * cell_size,
                    y * cell_size
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramField {
    Chosen,
    Optimal,
}

fn paint<F>(grid: &ExperimentGrid, background: Rgb, mut color: F) -> Result<Image>
where
    F: FnMut(&GridCell) -> Result<Rgb>,
{
    let d = grid.dim;
    let mut img = Image::filled(d, d, background);
    for cell in grid.iter() {
        img.set(cell.i, d - 1 - cell.j, color(cell)?);
    }
    Ok(img)
}

/// Unvisited cells, and cells without an optimal plan yet, render in the
/// palette's unvisited color.
pub fn plan_diagram(grid: &ExperimentGrid, field: DiagramField, palette: &Palette) -> Result<Image> {
    paint(grid, palette.unvisited, |cell| {
        let plan = match field {
            DiagramField::Chosen => Some(cell.chosen),
            DiagramField::Optimal => cell.optimal,
        };
        plan.map_or(Ok(palette.unvisited), |p| palette.color(p))
    })
}

pub fn impact_heatmap(grid: &ExperimentGrid, scale: &HeatmapScale) -> Image {
    let gray = Palette::default().unvisited;
    paint(grid, gray, |cell| Ok(cell.ratio.map_or(gray, |r| scale.color(r)))).expect("heatmap colors are infallible")
}

pub fn results_csv(grid: &ExperimentGrid) -> String {
    let mut s = String::from("i,j,e_A,e_B,chosen,optimal,ratio");
    for p in PlanId::ALL {
        let _ = write!(s, ",t_{p}");
    }
    s.push('\n');
    for j in 0..grid.dim {
        for i in 0..grid.dim {
            let Some(c) = grid.cell(i, j) else { continue };
            let _ = write!(
                s,
                "{i},{j},{},{},{},{},{}",
                c.e_a,
                c.e_b,
                c.chosen,
                c.optimal.map(|p| p.to_string()).unwrap_or_default(),
                c.ratio.map(|r| r.to_string()).unwrap_or_default(),
            );
            for p in PlanId::ALL {
                s.push(',');
                if let Some(t) = c.mean_time(p) {
                    let _ = write!(s, "{t}");
                }
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCellCounts {
    pub chosen: usize,
    pub optimal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub provenance: Provenance,
    pub accuracy: f64,
    pub impact_pct: f64,
    pub per_plan_cell_counts: BTreeMap<PlanId, PlanCellCounts>,
}

impl Summary {
    pub fn new(grid: &ExperimentGrid, metrics: SummaryMetrics) -> Self {
        let mut counts: BTreeMap<PlanId, PlanCellCounts> = BTreeMap::new();
        for c in grid.iter() {
            counts.entry(c.chosen).or_default().chosen += 1;
            if let Some(o) = c.optimal {
                counts.entry(o).or_default().optimal += 1;
            }
        }
        Summary {
            provenance: grid.provenance.clone(),
            accuracy: metrics.accuracy,
            impact_pct: metrics.impact_pct,
            per_plan_cell_counts: counts,
        }
    }
}

pub fn summary_file_name(metrics: &SummaryMetrics) -> String {
    format!(
        "summary_accuracy={:.2}_impact={:.2}.json",
        metrics.accuracy * 100.0,
        metrics.impact_pct
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub chosen: PathBuf,
    pub optimal: PathBuf,
    pub impact: PathBuf,
    pub results: PathBuf,
    pub summary: PathBuf,
    pub svgs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    pub scale: HeatmapScale,
    pub svg: bool,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_report(
    grid: &ExperimentGrid,
    metrics: SummaryMetrics,
    dir: &Path,
    palette: &Palette,
    options: ReportOptions,
) -> Result<ReportPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let chosen = plan_diagram(grid, DiagramField::Chosen, palette)?;
    let optimal = plan_diagram(grid, DiagramField::Optimal, palette)?;
    let impact = impact_heatmap(grid, &options.scale);

    let paths = ReportPaths {
        chosen: dir.join("chosen.ppm"),
        optimal: dir.join("optimal.ppm"),
        impact: dir.join("impact.ppm"),
        results: dir.join("results.csv"),
        summary: dir.join(summary_file_name(&metrics)),
        svgs: if options.svg {
            ["chosen.svg", "optimal.svg", "impact.svg"]
                .iter()
                .map(|f| dir.join(f))
                .collect()
        } else {
            Vec::new()
        },
    };
    write_file(&paths.chosen, &chosen.to_ppm())?;
    write_file(&paths.optimal, &optimal.to_ppm())?;
    write_file(&paths.impact, &impact.to_ppm())?;
    write_file(&paths.results, results_csv(grid).as_bytes())?;
    let json = serde_json::to_string_pretty(&Summary::new(grid, metrics)).map_err(|source| Error::Json {
        what: "summary",
        source,
    })?;
    write_file(&paths.summary, json.as_bytes())?;
    for (path, img) in paths.svgs.iter().zip([&chosen, &optimal, &impact]) {
        write_file(path, img.to_svg(10).as_bytes())?;
    }
    Ok(paths)
}
