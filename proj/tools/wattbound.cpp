#include <iostream>

int main() {
  std::cerr << "wattbound: CLI under construction\n";
  return 2;
}
