#include "lsi/acceptance.hpp"

#include <iostream>

int main() {
  lsi::AcceptanceSuite suite;
  return suite.run_all(std::cout) ? 0 : 1;
}
