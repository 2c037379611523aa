#include <string>
#include <vector>

#include "tacdss/cli.hpp"

int main(int argc, char** argv) { return tacdss::cli::cli_main(std::vector<std::string>(argv, argv + argc)); }
