#include <glog/logging.h>

#include <iostream>

#include "mupscope/cli/app.hpp"

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;
  return mupscope::cli::run_cli(argc, argv, std::cout, std::cerr);
}
