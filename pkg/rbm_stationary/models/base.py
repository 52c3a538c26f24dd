from pydantic import BaseModel


class StrictModel(BaseModel):
    """
    Base for every record read from or written to disk. Unknown keys are
    rejected so that typos in config files fail loudly.
    """

    class Config:
        extra = "forbid"
        allow_population_by_field_name = True
        validate_assignment = True
