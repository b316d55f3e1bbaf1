use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_zonecut");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn zonecut(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rgb_convert(dir: &Path, extra: &[&str]) -> Output {
    let (xml, place) = (fixture("rgb_led.xml"), fixture("rgb_led.place"));
    let mut args = vec!["convert", "--netlist", s(&xml), "--placement", s(&place)];
    args.extend_from_slice(extra);
    zonecut(&args, dir)
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn rgb_convert_writes_cut_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgb_convert(dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = String::from_utf8(read(dir.path().join("out/cut.svg"))).unwrap();
    assert!(svg.contains("board-outline"));
    let drc = String::from_utf8(read(dir.path().join("out/drc.txt"))).unwrap();
    assert!(drc.contains("PASS"));
    assert!(!dir.path().join("out/zonemap.zmap").exists());
    assert!(!dir.path().join("out/finetape.svg").exists());
}

#[test]
fn unknown_footprint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let xml = std::fs::read_to_string(fixture("rgb_led.xml"))
        .unwrap()
        .replace("r_axial", "r_mystery");
    std::fs::write(dir.path().join("n.xml"), xml).unwrap();
    let out = zonecut(
        &[
            "convert",
            "--netlist",
            "n.xml",
            "--placement",
            s(&fixture("rgb_led.place")),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r_mystery"));
}

#[test]
fn fine_tape_mode_writes_both_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgb_convert(dir.path(), &["--mode", "finetape", "--tape-width", "1.0"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let tape = String::from_utf8(read(dir.path().join("out/finetape.svg"))).unwrap();
    assert!(tape.contains("tape-corridors"));
    assert!(dir.path().join("out/cut.svg").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("peel"));
}

#[test]
fn trace_convert_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = zonecut(
        &["trace-convert", s(&fixture("two_traces.svg"))],
        dir.path(),
    );
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(dir.path().join("out/cut.svg").exists());

    let close = zonecut(
        &[
            "trace-convert",
            s(&fixture("close_traces.svg")),
            "--out",
            "close",
        ],
        dir.path(),
    );
    assert_eq!(close.status.code(), Some(1));
    assert!(!dir.path().join("close/cut.svg").exists());

    std::fs::write(
        dir.path().join("empty.svg"),
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="20mm" height="20mm" viewBox="0 0 20 20"></svg>"#,
    )
    .unwrap();
    let empty = zonecut(
        &["trace-convert", "empty.svg", "--out", "empty"],
        dir.path(),
    );
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn place_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let chain = fixture("chain4.xml");
    for sub in ["a", "b"] {
        let out = zonecut(
            &["place", "--netlist", s(&chain), "--seed", "7", "--out", sub],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let a = read(dir.path().join("a/placement.txt"));
    assert_eq!(a, read(dir.path().join("b/placement.txt")));
    assert!(
        String::from_utf8(a)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with('R'))
            .count()
            == 4
    );
}

#[test]
fn check_reads_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rgb_convert(dir.path(), &["--debug"]).status.code(), Some(0));
    let out = zonecut(&["check", "out/zonemap.zmap"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let bad = zonecut(
        &["check", "out/zonemap.zmap", "--board", "50x50"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
    std::fs::write(dir.path().join("junk.zmap"), b"not a dump").unwrap();
    assert_eq!(
        zonecut(&["check", "junk.zmap"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn outputs_are_byte_identical_across_runs_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, seed) in [("a", "1"), ("b", "1"), ("c", "99")] {
        let out = rgb_convert(
            dir.path(),
            &["--debug", "--labels", "--out", sub, "--seed", seed],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["cut.svg", "drc.txt", "zonemap.zmap"] {
        let a = read(dir.path().join("a").join(file));
        assert_eq!(a, read(dir.path().join("b").join(file)), "{file}");
        assert_eq!(a, read(dir.path().join("c").join(file)), "{file}");
    }

    let chain = fixture("chain4.xml");
    for sub in ["p", "q"] {
        let out = zonecut(
            &[
                "convert",
                "--netlist",
                s(&chain),
                "--seed",
                "3",
                "--debug",
                "--out",
                sub,
            ],
            dir.path(),
        );
        assert!(matches!(out.status.code(), Some(0 | 1)));
    }
    for file in ["placement.txt", "drc.txt", "zonemap.zmap"] {
        assert_eq!(
            read(dir.path().join("p").join(file)),
            read(dir.path().join("q").join(file)),
            "{file}"
        );
    }
}

#[test]
fn config_file_supplies_inputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("zonecut.toml"),
        format!(
            "netlist = {:?}\nplacement = {:?}\nout = \"from-config\"\n[export]\nlabels = true\n",
            fixture("rgb_led.xml"),
            fixture("rgb_led.place")
        ),
    )
    .unwrap();
    let out = zonecut(&["convert", "--config", "zonecut.toml"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = String::from_utf8(read(dir.path().join("from-config/cut.svg"))).unwrap();
    assert!(svg.contains("id=\"labels\""));

    std::fs::write(dir.path().join("bad.toml"), "colour = \"red\"\n").unwrap();
    let out = zonecut(&["convert", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn http(port: u16, method: &str, path: &str) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut body = raw[split + 4..].to_vec();
    if head
        .to_ascii_lowercase()
        .contains("transfer-encoding: chunked")
    {
        body = dechunk(&body);
    }
    (status, body)
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = data.windows(2).position(|w| w == b"\r\n").unwrap();
        let len =
            usize::from_str_radix(std::str::from_utf8(&data[..eol]).unwrap().trim(), 16).unwrap();
        if len == 0 {
            return out;
        }
        out.extend_from_slice(&data[eol + 2..eol + 2 + len]);
        data = &data[eol + 4 + len..];
    }
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_exports_what_convert_writes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rgb_convert(dir.path(), &[]).status.code(), Some(0));
    let (xml, place) = (fixture("rgb_led.xml"), fixture("rgb_led.place"));
    let mut child = Command::new(BIN)
        .args([
            "serve",
            "--netlist",
            s(&xml),
            "--placement",
            s(&place),
            "--port",
            "0",
        ])
        .current_dir(dir.path())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap();

    let (status, project) = http(port, "GET", "/api/project");
    assert_eq!(status, 200);
    assert!(String::from_utf8_lossy(&project).contains("\"D1\""));
    let (status, _) = http(port, "POST", "/api/recompute");
    assert_eq!(status, 200);
    let (status, svg) = http(port, "GET", "/api/export?mode=cut");
    assert_eq!(status, 200);
    assert_eq!(svg, read(dir.path().join("out/cut.svg")));
    drop(server);
}
