#include <cstdlib>
#include <iostream>
#include <string>

#include "gapflow/acceptance.hpp"

using namespace gapflow;

// Runs the acceptance criteria (all, or the ids given as arguments) and prints one line per criterion.
int main(int argc, char** argv) {
    AcceptanceOptions opt;
    if (argc > 1) {
        opt.criteria.clear();
        for (int i = 1; i < argc; ++i) opt.criteria.push_back(std::atoi(argv[i]));
    }
    bool failed = false;
    for (int id : opt.criteria) {
        auto r = run_criterion(id, opt);
        std::cout << summary_line(r) << "\n";
        for (const auto& c : r.checks)
            std::cout << "    " << status_name(c.status) << " " << c.name << " [" << c.citation << "] " << c.detail
                      << "\n";
        for (const auto& s : r.info) std::cout << "    info: " << s << "\n";
        std::cout.flush();
        failed = failed || r.status != Status::Pass;
    }
    return failed ? 1 : 0;
}
