mod support;

use std::collections::BTreeSet;
use std::process::Stdio;
use std::time::Duration;

use gvss_daemon::service::{Credential, ROUTES};
use support::*;
use tokio::io::{AsyncBufReadExt, BufReader};

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[tokio::test]
async fn login_caches_a_private_token() {
    let env = Env::new();
    let daemon = env.start().await;
    let url = daemon.url();

    let bad = env
        .gvss(&url, &["login", "--username", USER, "--password", "nope"])
        .await;
    assert_eq!(code(&bad), 1, "{}", stderr(&bad));
    assert!(!env.session_file.exists());

    let out = env.gvss_login(&url).await;
    assert_eq!(stdout_json(&out)["cameras"][0]["camera_id"], "cam0");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(&env.session_file).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o600);
    }
    let state = env.gvss(&url, &["state"]).await;
    assert_eq!(code(&state), 0);
    assert_eq!(stdout_json(&state)["mode"], "Armed");
    daemon.shutdown().await;
}

#[tokio::test]
async fn exit_codes_follow_http_class() {
    let env = Env::new();
    let daemon = env.start().await;
    first_frame(&daemon).await;
    let url = daemon.url();

    let unauth = env.gvss(&url, &["state"]).await;
    assert_eq!(code(&unauth), 1);
    assert!(stderr(&unauth).contains("401"));

    env.gvss_login(&url).await;
    let kill = env.gvss(&url, &["kill"]).await;
    assert_eq!(code(&kill), 1, "kill while Armed maps 409 to 1");
    assert!(stderr(&kill).contains("409"));

    std::fs::remove_dir_all(env.path().join("snapshots")).unwrap();
    let save = env.gvss(&url, &["snapshot", "save"]).await;
    assert_eq!(code(&save), 5, "{}", stderr(&save));

    let addr = daemon.addr();
    daemon.shutdown().await;
    let down = env.gvss(&format!("http://{addr}"), &["state"]).await;
    assert_eq!(code(&down), 6, "{}", stderr(&down));
}

#[tokio::test]
async fn frame_and_snapshot_files() {
    let env = Env::new();
    let daemon = env.start().await;
    first_frame(&daemon).await;
    let url = daemon.url();
    env.gvss_login(&url).await;

    let out_path = env.path().join("f.png");
    let out = env
        .gvss(&url, &["frame", "--enc", "png24", "--out", out_path.to_str().unwrap()])
        .await;
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bytes = std::fs::read(&out_path).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    let doc = stdout_json(&out);
    assert_eq!(doc["bytes"], bytes.len());
    assert!(doc["sequence"].as_u64().unwrap() >= 1);

    let saved = env.gvss(&url, &["snapshot", "save", "--enc", "pnggray", "--w", "64", "--h", "48"]).await;
    assert_eq!(code(&saved), 0, "{}", stderr(&saved));
    let record = stdout_json(&saved);
    let id = record["snapshot_id"].as_str().unwrap().to_string();
    let got_path = env.path().join("snap.png");
    let got = env.gvss(&url, &["snapshot", "get", &id, "--out", got_path.to_str().unwrap()]).await;
    assert_eq!(code(&got), 0);
    assert_eq!(std::fs::read(&got_path).unwrap(), daemon.state().store.fetch(&id).unwrap().bytes);
    daemon.shutdown().await;
}

#[tokio::test]
async fn hash_password_output_is_a_valid_credential() {
    let env = Env::new();
    let out = env.gvss("http://unused", &["hash-password", "--password", "s3cret"]).await;
    assert_eq!(code(&out), 0);
    let stored = stdout(&out).trim().to_string();
    let cred = Credential::from_stored("someone", &stored).unwrap();
    assert!(cred.verify("s3cret"));
    assert!(!cred.verify("s3cret "));
}

#[tokio::test]
async fn every_route_is_reachable_from_a_verb() {
    let env = Env::new();
    let daemon = env.start().await;
    first_frame(&daemon).await;
    let url = daemon.url();
    let frame_out = env.path().join("frame.jpg");
    let snap_out = env.path().join("snap.jpg");
    let frame_out = frame_out.to_str().unwrap();
    let snap_out = snap_out.to_str().unwrap();

    let mut covered = BTreeSet::new();
    let mut run = |args: Vec<String>, route: (&'static str, &'static str)| {
        covered.insert(route);
        args
    };

    let plan: Vec<(Vec<String>, i32)> = vec![
        (run(vec!["login".into(), "--username".into(), USER.into(), "--password".into(), PASSWORD.into()], ("POST", "/login")), 0),
        (run(vec!["cameras".into()], ("GET", "/cameras")), 0),
        (run(vec!["frame".into(), "--out".into(), frame_out.into()], ("GET", "/frame")), 0),
        (run(vec!["state".into()], ("GET", "/state")), 0),
        (run(vec!["disarm".into()], ("POST", "/disarm")), 0),
        (run(vec!["arm".into()], ("POST", "/arm")), 0),
        (run(vec!["snapshot".into(), "save".into()], ("POST", "/snapshots")), 0),
        (run(vec!["snapshot".into(), "list".into()], ("GET", "/snapshots")), 0),
        (run(vec!["snapshot".into(), "get".into(), "ID".into(), "--out".into(), snap_out.into()], ("GET", "/snapshots/{id}")), 0),
        (run(vec!["snapshot".into(), "delete".into(), "ID".into()], ("DELETE", "/snapshots/{id}")), 0),
        // Armed: the request reaches the handler, which answers 409
        (run(vec!["kill".into()], ("POST", "/control")), 1),
    ];
    let all: BTreeSet<_> = ROUTES.iter().copied().collect();
    assert_eq!(covered, all, "verbs must cover the route table");

    let mut snapshot_id = String::new();
    for (args, expected) in plan {
        let args: Vec<String> = args.into_iter().map(|a| if a == "ID" { snapshot_id.clone() } else { a }).collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = env.gvss(&url, &refs).await;
        assert_eq!(code(&out), expected, "{args:?}: {}", stderr(&out));
        if args.starts_with(&["snapshot".to_string(), "save".to_string()]) {
            snapshot_id = stdout_json(&out)["snapshot_id"].as_str().unwrap().to_string();
        }
    }
    assert!(daemon.state().store.list().is_empty());
    daemon.shutdown().await;
}

#[tokio::test]
async fn simulate_breach_preconditions() {
    let env = EnvBuilder::default()
        .sensor("kind = scripted\nscript = CLEAR")
        .build();
    let daemon = env.start().await;
    let url = daemon.url();
    env.gvss_login(&url).await;
    let out = env
        .gvss(&url, &["simulate-breach", "--config", env.config_path.to_str().unwrap()])
        .await;
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("kind = file"), "{}", stderr(&out));
    daemon.shutdown().await;

    let env = Env::new();
    let daemon = env.start().await;
    let url = daemon.url();
    env.gvss_login(&url).await;
    assert_eq!(code(&env.gvss(&url, &["disarm"]).await), 0);
    let out = env
        .gvss(
            &url,
            &["simulate-breach", "--config", env.config_path.to_str().unwrap(), "--timeout-secs", "1"],
        )
        .await;
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert_eq!(daemon.orchestrator().state().mode, gvss_daemon::orchestrator::Mode::Disarmed);
    assert_eq!(daemon.orchestrator().state().episode_id, 0);
    daemon.shutdown().await;
}

#[tokio::test]
async fn serve_config_errors_exit_2() {
    let env = Env::new();
    let text = std::fs::read_to_string(&env.config_path).unwrap();
    let broken = text.replace("[storage]\nsnapshot_dir = snapshots\n", "");
    std::fs::write(&env.config_path, broken).unwrap();
    let out = env
        .gvss("http://unused", &["serve", "--config", env.config_path.to_str().unwrap()])
        .await;
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("snapshot_dir"), "{}", stderr(&out));

    std::fs::write(&env.config_path, "[sensor]\nkind = laser\n").unwrap();
    let out = env
        .gvss("http://unused", &["serve", "--config", env.config_path.to_str().unwrap()])
        .await;
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[tokio::test]
async fn serve_on_a_bound_port_exits_3() {
    let env = Env::new();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let out = env
        .gvss(
            "http://unused",
            &["serve", "--config", env.config_path.to_str().unwrap(), "--port", &port],
        )
        .await;
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[cfg(unix)]
#[tokio::test]
async fn sigterm_releases_the_lock_and_flushes_the_audit_log() {
    let env = Env::new();
    let marker = env.path().join("unlocked");
    let mut text = std::fs::read_to_string(&env.config_path).unwrap();
    text.push_str(&format!("\n[lock]\nunlock_command = touch {}\n", marker.display()));
    std::fs::write(&env.config_path, text).unwrap();

    let mut child = tokio::process::Command::new(env!("CARGO_BIN_EXE_gvss"))
        .args(["serve", "--config", env.config_path.to_str().unwrap(), "--port", "0", "--log-level", "warn"])
        .env("GVSS_SESSION_FILE", &env.session_file)
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let banner = tokio::time::timeout(Duration::from_secs(10), lines.next_line())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    assert!(banner.contains("cam0"), "{banner}");
    let url = banner
        .split_whitespace()
        .find(|w| w.starts_with("http://"))
        .unwrap()
        .to_string();

    env.gvss_login(&url).await;
    let out = env
        .gvss(&url, &["simulate-breach", "--config", env.config_path.to_str().unwrap()])
        .await;
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["mode"], "LockedStreaming");
    assert!(!marker.exists());

    let pid = child.id().unwrap().to_string();
    assert!(std::process::Command::new("kill").args(["-TERM", &pid]).status().unwrap().success());
    let status = tokio::time::timeout(Duration::from_secs(10), child.wait()).await.unwrap().unwrap();
    assert!(status.success(), "{status}");
    assert!(marker.exists(), "unlock hook ran on shutdown");
    let audit = std::fs::read_to_string(env.path().join("audit.log")).unwrap();
    let last = audit.lines().rfind(|l| l.contains(" UNLOCK ")).unwrap();
    assert!(last.contains("reason=shutdown"), "{audit}");
}

#[test]
fn example_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("gvss.example.conf");
    let config = gvss_daemon::Config::load(&path).unwrap();
    assert_eq!(config.cameras[0].id, "front");
    assert_eq!(config.server.port, 8686);
    assert!(config.users[0].verify("change-me"));
}
