import yaml
from django.core.management.base import BaseCommand

from apps.household.loader import describe_scenario
from apps.simulation.manifest import add_manifest_arguments, command_errors, manifest_from_options


class Command(BaseCommand):
    help = "Valida escenario y parámetros sin ejecutar nada e imprime los valores efectivos."

    def add_arguments(self, parser):
        add_manifest_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            manifest = manifest_from_options(options)

        document = describe_scenario(manifest.scenario)
        document["solver"] = {
            "solvers": manifest.solvers,
            "seeds": manifest.seeds,
            "population_size": manifest.config.population_size,
            "max_iterations": manifest.config.max_iterations,
            "crossover_rate": manifest.config.crossover_rate,
            "mutation_rate": manifest.config.mutation_rate,
            "evaluation_budget": manifest.config.evaluation_budget,
        }
        document["laguerre"] = {
            "pole": manifest.laguerre.pole,
            "order": manifest.laguerre.order,
            "horizon": manifest.laguerre.horizon,
        }
        document["error_profile"] = manifest.error_profile.name if manifest.error_profile else None
        self.stdout.write(yaml.safe_dump(document, sort_keys=False, allow_unicode=True))
        self.stdout.write(self.style.SUCCESS("✅ Escenario válido"))
