//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "raft_xplore.h"

int main(void) {
    RxConfig *cfg = NULL;
    if (rx_config_new(0, 1, 0, &cfg) != RX_STATUS_INVALID_ARGUMENT) return 10;
    if (strstr(rx_last_error(), "servers") == NULL) return 11;
    if (rx_config_new(1, 1, 0, &cfg) != RX_STATUS_OK) return 12;
    rx_config_set_network(cfg, RX_NETWORK_RELIABLE);

    RxReport *report = NULL;
    if (rx_check(cfg, 1000, 0, &report) != RX_STATUS_OK) return 13;
    printf("states=%llu transitions=%llu\n",
           (unsigned long long)rx_report_states(report),
           (unsigned long long)rx_report_transitions(report));
    char *json = rx_report_json(report);
    if (json == NULL || strstr(json, "\"statesExplored\":4") == NULL) return 14;
    rx_string_free(json);
    rx_report_free(report);

    char *dot = NULL;
    if (rx_graph_dot(cfg, 100, &dot) != RX_STATUS_OK) return 15;
    rx_string_free(dot);
    rx_config_free(cfg);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/<name>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libraft_xplore_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();

    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to compile");

    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "client exited with {:?}",
        out.status.code()
    );
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "states=4 transitions=4\n"
    );
}
