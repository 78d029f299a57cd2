#include <stdio.h>
#include <string.h>
#include "semalloc.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SemallocStatus s_ = (call);                                        \
        if (s_ != SEMALLOC_STATUS_OK) {                                    \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    semalloc_last_error() ? semalloc_last_error() : "?");  \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    SemallocCatalog *catalog = NULL;
    CHECK(semalloc_catalog_load(argv[1], &catalog));
    if (semalloc_catalog_len(catalog) != 4) return 3;

    SemallocEnv *env = NULL;
    CHECK(semalloc_env_new(catalog, 3, 42, &env));
    semalloc_catalog_free(catalog);

    double obs[9];
    CHECK(semalloc_env_reset(env, obs, 9));
    uint32_t scm[3] = {1, 1, 1};
    double power[3] = {1.0, 1.0, 1.0};
    double bandwidth[3] = {0.5, 0.5, 0.5};
    double reward = 0.0, total = 0.0;
    bool done = false;
    int steps = 0;
    while (!done) {
        CHECK(semalloc_env_step(env, scm, power, bandwidth, 3, obs, 9, &reward, &done));
        total += reward;
        steps++;
    }
    if (semalloc_env_step(env, scm, power, bandwidth, 3, obs, 9, &reward, &done) != SEMALLOC_STATUS_CONTRACT)
        return 4;
    if (semalloc_env_reset(env, obs, 4) != SEMALLOC_STATUS_DIMENSION_MISMATCH) return 5;
    if (strstr(semalloc_last_error(), "observation") == NULL) return 6;
    semalloc_env_free(env);
    printf("steps=%d total=%.17g version=%s\n", steps, total, semalloc_version());
    return 0;
}
