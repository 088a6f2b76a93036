// Regenerates the bundled replay fixture and its goldens. Run from the repo
// root after intentional behavior changes:
//   build/tools/make_fixtures fixtures

#include <cstdio>
#include <filesystem>

#include "support/demo_fixture.hpp"
#include "videotree/config.hpp"
#include "videotree/eval.hpp"
#include "videotree/inspect.hpp"
#include "videotree/prompts.hpp"

namespace fs = std::filesystem;
namespace vt = videotree;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <fixtures-dir>\n", argv[0]);
        return 2;
    }
    fs::path dir = argv[1];
    demo_fixture::write_inputs(dir);

    vt::CliConfig cfg = vt::load_cli_config(dir / "demo.toml");
    auto tasks = vt::load_dataset(dir / "dataset.json");
    auto outcome = vt::evaluate(tasks, cfg.asset_dir, cfg.pipeline, cfg.backends, 1);
    for (const auto& [uid, err] : outcome.report.failures) {
        std::fprintf(stderr, "fixture run failed for %s: %s\n", uid.c_str(), err.c_str());
        return 1;
    }

    const vt::RunRecord& rec0 = *outcome.records[0];
    demo_fixture::write_text(dir / "golden" / "runrecord_demo-000.json",
                             vt::record_json_with_masked_timings(rec0));
    demo_fixture::write_text(dir / "golden" / "tree_demo-000.json",
                             vt::export_tree(rec0.tree, vt::TreeExportFormat::structured));
    demo_fixture::write_text(dir / "golden" / "tree_demo-000.dot",
                             vt::export_tree(rec0.tree, vt::TreeExportFormat::graph));
    demo_fixture::write_text(dir / "golden" / "predictions.json",
                             vt::render_predictions(tasks, outcome.records));

    vt::RunRecord masked = rec0;
    masked.stage_times = vt::StageTimes{};
    demo_fixture::write_text(dir / "golden" / "inspect_demo-000.txt", vt::render_inspect(masked));

    demo_fixture::write_text(
        dir / "golden" / "prompt_relevance.txt",
        vt::render_relevance_prompt(demo_fixture::prompt_golden_captions(),
                                    demo_fixture::prompt_golden_task()));
    demo_fixture::write_text(dir / "golden" / "prompt_qa.txt",
                             vt::render_qa_prompt(demo_fixture::prompt_golden_captions(),
                                                  demo_fixture::prompt_golden_task()));

    std::printf("fixture written to %s (4 tasks, accuracy %.2f)\n", dir.string().c_str(),
                outcome.report.accuracy);
    return 0;
}
