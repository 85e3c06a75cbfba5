use std::path::Path;

use intrasplit::experiment::{
    cmd_export_plot, cmd_run, cmd_split_report, cmd_sweep, load_manifest_data, run_grid, run_sweep, Manifest, Method,
    SweepParam,
};

fn tiny(methods: &str, classes: &str, seeds: &str, out: &Path) -> Manifest {
    let text = format!(
        "[dataset]
kind = synthetic-digits
per_class = 100
seed = 2
name = tiny
[experiment]
classes = {classes}
methods = {methods}
seeds = {seeds}
n_train = 32
test_abnormal = 90
output_dir = {}
[train]
batch_size = 8
stage1_epochs = 2
stage3_epochs = 2
channels = 2, 4, 4
latent_dim = 6
",
        out.display()
    );
    Manifest::parse(&text, Path::new(".")).unwrap()
}

#[test]
fn grid_has_one_row_per_cell_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny("ours, cae", "1", "0, 1", dir.path());
    let report = cmd_run(&m).unwrap();
    let order: Vec<(u8, Method, u64)> = report.cells.iter().map(|c| (c.normal_class, c.method, c.seed)).collect();
    assert_eq!(
        order,
        vec![(1, Method::Ours, 0), (1, Method::Ours, 1), (1, Method::Cae, 0), (1, Method::Cae, 1)]
    );
    assert_eq!(report.failures(), 0);

    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 5);
    let aggregate = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let lines: Vec<&str> = aggregate.lines().collect();
    assert_eq!(lines[0], "dataset,normal_class,ours,ours_std,cae,cae_std,failures");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("tiny,mean,"));
}

#[test]
fn untrained_methods_are_shared_across_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = tiny("original, pca, hog", "0, 7", "3, 4", dir.path());
    m.experiment.n_train = 70;
    let (data, ext) = load_manifest_data(&m).unwrap();
    let report = run_grid(&m, &data, ext.as_ref()).unwrap();
    assert_eq!(report.cells.len(), 12);
    for pair in report.cells.chunks(2) {
        assert_eq!(pair[0].bacc, pair[1].bacc);
        let b = *pair[0].bacc.as_ref().unwrap();
        assert!((0.0..=1.0).contains(&b));
    }
}

#[test]
fn failing_class_does_not_stop_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = tiny("original", "0, 1", "0", dir.path());
    m.experiment.n_train = 1000;
    let report = cmd_run(&m).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert_eq!(report.failures(), 2);
    let aggregate = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert!(aggregate.lines().last().unwrap().ends_with(",2"), "{aggregate}");
}

#[test]
fn sweep_points_reproduce_matching_runs() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny("ours, cls", "2", "0, 1", dir.path());
    let (data, ext) = load_manifest_data(&m).unwrap();
    let report = run_grid(&m, &data, ext.as_ref()).unwrap();
    let ours = report.summary(Method::Ours);
    let cls = report.summary(Method::Cls);

    let rho = run_sweep(&m, &data, SweepParam::Rho, &[10.0, 0.0]).unwrap();
    assert_eq!(rho[0].summary, ours, "ρ = 10 is the default run");
    assert_eq!(rho[1].summary, cls, "ρ = 0 is the closeness-only baseline");

    let beta = run_sweep(&m, &data, SweepParam::Beta, &[1e-5]).unwrap();
    assert_eq!(beta[0].summary, ours, "β = 1e-5 is the default run");
}

#[test]
fn sweep_writes_curve_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny("ours", "3", "0", dir.path());
    let points = cmd_sweep(&m, SweepParam::Beta, &[1e-7, 1e-3, 1e-1]).unwrap();
    assert_eq!(points.len(), 3);
    let curve = dir.path().join("beta_curve.csv");
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("beta,mean_bacc,std_bacc,failures\n"));
    assert_eq!(text.lines().count(), 4);

    let svg = dir.path().join("beta.svg");
    cmd_export_plot(&curve, &svg).unwrap();
    let body = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(body.matches("class=\"marker\"").count(), 3);

    assert!(cmd_sweep(&m, SweepParam::Beta, &[0.0]).is_err());
    assert!(cmd_sweep(&m, SweepParam::Rho, &[101.0]).is_err());
}

#[test]
fn split_report_lists_extremes() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny("ours", "4", "0", dir.path());
    let r = cmd_split_report(&m, 4, 0, 3).unwrap();
    assert_eq!((r.lowest.len(), r.highest.len()), (3, 3));
    assert!(r.lowest.iter().all(|l| r.highest.iter().all(|h| l.1 <= h.1)));
    let csv = std::fs::read_to_string(&r.path).unwrap();
    assert_eq!(csv.lines().count(), 33);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",atypical")).count(), 3);
}

#[test]
fn shipped_presets_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(root.join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        // Stand-in data files so the path checks pass.
        for line in text.lines() {
            let Some((key, value)) = line.split_once('=') else { continue };
            if ["train_images", "train_labels", "test_images", "test_labels", "train_files", "test_files"]
                .contains(&key.trim())
            {
                for file in value.split(',') {
                    let target = configs.join(file.trim());
                    std::fs::create_dir_all(target.parent().unwrap()).unwrap();
                    std::fs::write(target, b"").unwrap();
                }
            }
        }
        let copy = configs.join(path.file_name().unwrap());
        std::fs::write(&copy, &text).unwrap();
        let m = Manifest::load(&copy).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(m.output_dir.starts_with(dir.path().join("configs/../results")), "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}
