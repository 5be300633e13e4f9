use coevo_core::shape::chain_vertices;
use coevo_core::BrickChain;

const PX_PER_UNIT: f64 = 60.0;
const MARGIN: f64 = 0.5;

/// Renders the brick outlines of a chain as a standalone SVG document.
pub fn render_chain(chain: &BrickChain, title: &str) -> String {
    let rects = chain_vertices(chain);
    let points = rects.iter().flatten();
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    min_x -= MARGIN;
    min_y -= MARGIN;
    max_x += MARGIN;
    max_y += MARGIN;
    let width = (max_x - min_x) * PX_PER_UNIT;
    let height = (max_y - min_y) * PX_PER_UNIT;

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\">\n<title>{}</title>\n",
        escape(title)
    );
    for (i, rect) in rects.iter().enumerate() {
        let pts: Vec<String> = rect
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    (p.x - min_x) * PX_PER_UNIT,
                    (max_y - p.y) * PX_PER_UNIT
                )
            })
            .collect();
        out.push_str(&format!(
            "<polygon data-brick=\"{i}\" points=\"{}\" fill=\"#c8743c\" stroke=\"#3b2414\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
