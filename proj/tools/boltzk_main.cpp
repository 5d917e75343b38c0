#include <cstdio>

// Placeholder entry point; the subcommand wiring lands with the experiment
// layer. Exits with the config-error code so nothing mistakes it for a
// working pipeline.
int main() {
  std::fprintf(stderr, "boltzk: command-line layer not wired up yet\n");
  return 2;
}
