// Exit-code contract of the command-line binary: 0 success, 1 usage error,
// 2 domain error, 3 I/O error (validation failure = 4 is exercised by the
// validate paths in the acceptance suite).
#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

namespace {

int exit_code_of(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int check(const char* what, int got, int want) {
  if (got == want) return 0;
  std::printf("FAIL %s: exit code %d, expected %d\n", what, got, want);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::printf("usage: cli_contract_test <twinbeam binary>\n");
    return 2;
  }
  const std::string cli = argv[1];
  int failures = 0;
  failures += check("success", exit_code_of(cli + " theory --N 1 --mu 2 --eta 0.5"), 0);
  failures += check("usage error (unknown subcommand)", exit_code_of(cli + " frobnicate"), 1);
  failures += check("usage error (bad flag)", exit_code_of(cli + " theory --bogus 1"), 1);
  failures += check("domain error (negative N)", exit_code_of(cli + " theory --N -1 --mu 2"), 2);
  failures += check("domain error (N and M together)",
                    exit_code_of(cli + " theory --N 1 --M 1 --eta 0.5"), 2);
  failures += check("I/O error (missing records)",
                    exit_code_of(cli + " analyze --records /nonexistent/records.csv"), 3);
  failures += check("I/O error (missing config)",
                    exit_code_of(cli + " theory --config /nonexistent/config"), 3);
  if (failures == 0) std::printf("PASS cli exit-code contract\n");
  return failures == 0 ? 0 : 1;
}
