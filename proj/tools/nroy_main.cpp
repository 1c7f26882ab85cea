#include <cstdio>

int main() {
  std::puts("nroy: command line interface not wired up yet");
  return 0;
}
