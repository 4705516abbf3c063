// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <iostream>

#include "estatcom/verify.hpp"

int main(int argc, char** argv) {
  estatcom::verify::Options opt;
  if (argc > 1) opt.out_dir = argv[1];
  const auto results = estatcom::verify::run_suite(estatcom::verify::Suite::All, opt);
  estatcom::verify::print_table(std::cout, results);
  return estatcom::verify::all_pass(results) ? 0 : 1;
}
