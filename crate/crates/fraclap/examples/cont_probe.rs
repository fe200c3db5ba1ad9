use fraclap::domain::DomainSpec;
use fraclap::extension::*;
use fraclap::field::FieldFn;
use fraclap::*;

fn main() {
    let bump = FieldFn::smooth_bump(1);
    let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
    for &alpha in &[0.5, 1.0] {
        let p = FracParams::new(1, alpha).unwrap();
        for &extent in &[3.0, 3.5, 4.0] {
            let grid = Grid::new(1, 0.02, extent).unwrap();
            let u = GridFunction::sample(grid.clone(), |x| bump.eval(x)).unwrap();
            let mut traces = Vec::new();
            let mut meds = Vec::new();
            for &ymax in &[5.0, 10.0] {
                let cfg = ExtensionConfig { y_max: ymax, ny: 96, grading: 2.0, calibrate: true };
                let cv = cross_validate(&u, &dom, &cfg, &p).unwrap();
                meds.push((ymax, cv.median_rel, cv.max_rel));
                // collect trace values in the window
                let mut win = Vec::new();
                for (x, t) in cv.xs.iter().zip(cv.trace.iter()) {
                    if dom.dist(&[*x]) >= 0.1 { win.push(*t); }
                }
                traces.push(win);
            }
            let mut shifts: Vec<f64> = traces[0].iter().zip(traces[1].iter())
                .map(|(a, b)| ((a - b) / b).abs()).collect();
            shifts.sort_by(f64::total_cmp);
            println!("alpha={alpha} extent={extent}: med5={:.4} med10={:.4} max10={:.4} shift_med={:.5} shift_max={:.5}",
                meds[0].1, meds[1].1, meds[1].2, shifts[shifts.len()/2], shifts.last().unwrap());
        }
    }
}
