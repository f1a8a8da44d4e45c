use std::time::Instant;
fn main() {
    let t = Instant::now();
    let opts = solcmc::sphere::SolveOptions { resolution: 10_000, tol: 0.01, ..Default::default() };
    match solcmc::sphere::solve(1.0, &opts) {
        Ok(out) => {
            println!("OK {:?} iters={} hdev={:.6}", t.elapsed(), out.iterations, out.sphere.max_h_deviation());
            out.sphere.mesh.save_obj(std::path::Path::new("/tmp/h1_sphere.obj"),
                Some(&out.sphere.data.frame_normal)).unwrap();
        }
        Err(e) => println!("ERR {e}"),
    }
}
