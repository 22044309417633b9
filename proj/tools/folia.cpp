#include <cstdio>

int main() {
  std::fprintf(stderr, "folia: subcommands not wired up yet\n");
  return 1;
}
