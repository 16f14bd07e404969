#include "hipt/service/cli.hpp"

int main(int argc, char** argv) { return hipt::service::cli_main(argc, argv); }
