#include <cstdlib>
#include <iostream>
#include <string>

#include "steinflow/cli.hpp"
#include "steinflow/parallel.hpp"

int main(int argc, char** argv) {
  // STEINFLOW_THREADS caps the worker count; 0 or unset means one per core.
  if (const char* env = std::getenv("STEINFLOW_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n < 0) throw std::out_of_range("negative");
      steinflow::parallel::set_worker_count(static_cast<unsigned>(n));
    } catch (const std::exception&) {
      std::cerr << "error: STEINFLOW_THREADS must be a nonnegative integer, got '" << env << "'\n";
      return 2;
    }
  }
  return steinflow::cli::dispatch(argc, argv);
}
